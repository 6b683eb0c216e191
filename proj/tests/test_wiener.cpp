// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/wiener.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "doctest.h"
#include "mcse/common.hpp"
#include "mcse/mnmf.hpp"

using namespace mcse;
using Cplx = std::complex<double>;

namespace {

Spectrogram make_spec(int freq, int chans, int frames, std::uint64_t seed) {
  Spectrogram spec;
  spec.frame_len = 2 * (freq - 1);
  spec.hop = spec.frame_len / 2;
  spec.sample_rate = 16000;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int m = 0; m < chans; ++m) {
    Eigen::MatrixXcd ch(freq, frames);
    for (Eigen::Index i = 0; i < ch.size(); ++i)
      ch.data()[i] = Cplx(normal(rng), normal(rng));
    spec.channels.push_back(std::move(ch));
  }
  spec.validate();
  return spec;
}

VaeModel tiny_vae(int freq, int latent, std::uint64_t seed) {
  return VaeModel::init(freq, latent, seed, 16, 8);
}

VaeModel unit_vae(int freq, int latent) {
  VaeModel model = tiny_vae(freq, latent, 99);
  model.p.dec_wout.setZero();
  model.p.dec_bout.setZero();
  return model;
}

Eigen::MatrixXd uniform_mat(int rows, int cols, double lo, double hi,
                            std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Eigen::MatrixXcd random_hermitian_pd(int m, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXcd a(m, m);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    a.data()[i] = Cplx(normal(rng), normal(rng));
  Eigen::MatrixXcd h = a * a.adjoint();
  h += 0.1 * static_cast<double>(m) * Eigen::MatrixXcd::Identity(m, m);
  return h;
}

// Fully populated random model and state for a given channel count.
struct Setup {
  Spectrogram spec;
  JointModel model;
  McemState state;
};

Setup make_setup(int chans, std::uint64_t seed) {
  const int freq = 5, frames = 6, latent = 3, ke = 2, kb = 2;
  Setup s;
  s.spec = make_spec(freq, chans, frames, seed);
  s.model.vae = tiny_vae(freq, latent, derive_seed(seed, 1));
  s.model.speech_spatial = SpatialCovSet(freq, chans);
  s.model.ego.w = uniform_mat(freq, ke, 0.2, 1.0, derive_seed(seed, 2));
  s.model.ego.h = uniform_mat(ke, frames, 0.2, 1.0, derive_seed(seed, 3));
  s.model.ego.r = SpatialCovSet(freq, chans);
  s.model.env.w = uniform_mat(freq, kb, 0.2, 1.0, derive_seed(seed, 4));
  s.model.env.h = uniform_mat(kb, frames, 0.2, 1.0, derive_seed(seed, 5));
  s.model.env.r = SpatialCovSet(freq, chans);
  Rng rng = make_rng(derive_seed(seed, 6));
  for (int f = 0; f < freq; ++f) {
    s.model.speech_spatial.at(f) = random_hermitian_pd(chans, rng);
    s.model.ego.r.at(f) = random_hermitian_pd(chans, rng);
    s.model.env.r.at(f) = random_hermitian_pd(chans, rng);
  }
  s.state = init_state(s.model, s.spec);
  s.state.g = uniform_mat(frames, 1, 0.5, 2.0, derive_seed(seed, 7)).col(0);
  Rng zrng = make_rng(derive_seed(seed, 8));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int r = 0; r < 2; ++r) {
    Eigen::MatrixXd z(frames, latent);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(zrng);
    s.state.z_samples.push_back(z);
  }
  return s;
}

}  // namespace

TEST_CASE("zero noise model passes the mixture through unchanged") {
  const int freq = 6, chans = 2, frames = 8;
  const Spectrogram spec = make_spec(freq, chans, frames, 11);
  JointModel model;
  model.vae = tiny_vae(freq, 3, 12);
  model.speech_spatial = SpatialCovSet(freq, chans);
  McemState state = init_state(model, spec);
  state.z_samples = {state.z_chain};

  const EnhancementResult result = wiener_filter(spec, model, state);
  for (int m = 0; m < chans; ++m)
    CHECK(result.speech_spec.channels[m] == spec.channels[m]);
  CHECK(result.speech_clip.samples == istft(spec).samples);
  CHECK(result.frame_noise_var.maxCoeff() == 0.0);
  CHECK(result.frame_speech_var.minCoeff() > 0.0);
}

TEST_CASE("single channel with equal speech and noise power halves the input") {
  const int freq = 3, frames = 4;
  const Spectrogram spec = make_spec(freq, 1, frames, 21);
  JointModel model;
  model.vae = unit_vae(freq, 2);  // sigma^2 = 1 for every latent
  model.speech_spatial = SpatialCovSet(freq, 1);
  model.env.w = Eigen::MatrixXd::Ones(freq, 1);
  model.env.h = Eigen::MatrixXd::Ones(1, frames);
  model.env.r = SpatialCovSet(freq, 1);
  McemState state = init_state(model, spec);
  state.z_chain.setZero();
  state.z_samples = {state.z_chain};

  // g sigma^2 R_S = 1 and lambda_B R_B = 1, so the Wiener gain is exactly 1/2.
  const EnhancementResult result = wiener_filter(spec, model, state);
  for (int f = 0; f < freq; ++f)
    for (int t = 0; t < frames; ++t) {
      const Cplx expected = 0.5 * spec.channels[0](f, t);
      CHECK(std::abs(result.speech_spec.channels[0](f, t) - expected) <=
            1e-12 * std::abs(expected));
    }
  CHECK(result.frame_speech_var(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(result.frame_noise_var(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("filter matches a dense per-sample recomputation") {
  for (int chans : {2, 3}) {
    const Setup s = make_setup(chans, 31 + chans);
    const EnhancementResult result = wiener_filter(s.spec, s.model, s.state);

    const int freq = s.spec.freq_bins();
    const int frames = s.spec.frames();
    const int samples = static_cast<int>(s.state.z_samples.size());
    for (int f = 0; f < freq; ++f) {
      const Eigen::MatrixXcd rs = s.model.speech_spatial.at(f);
      for (int t = 0; t < frames; ++t) {
        Eigen::MatrixXcd filt = Eigen::MatrixXcd::Zero(chans, chans);
        for (int r = 0; r < samples; ++r) {
          const Eigen::VectorXd z_t = s.state.z_samples[r].row(t).transpose();
          const Eigen::VectorXd sigma2 = decode(s.model.vae, z_t);
          const Eigen::MatrixXcd sp = s.state.g(t) * sigma2(f) * rs;
          const Eigen::MatrixXcd cov =
              mixture_cov(s.model, s.state, z_t, f, t);
          filt += sp * cov.inverse();
        }
        filt /= samples;
        Eigen::VectorXcd x(chans);
        for (int m = 0; m < chans; ++m) x(m) = s.spec.channels[m](f, t);
        const Eigen::VectorXcd expected = filt * x;
        for (int m = 0; m < chans; ++m)
          CHECK(std::abs(result.speech_spec.channels[m](f, t) - expected(m)) <=
                1e-12 * (1.0 + expected.norm()));
      }
    }
  }
}

TEST_CASE("filter output is linear in the mixture") {
  const Setup s = make_setup(2, 41);
  const EnhancementResult base = wiener_filter(s.spec, s.model, s.state);

  const Cplx scale(1.3, -0.4);
  Spectrogram scaled = s.spec;
  for (auto& ch : scaled.channels) ch *= scale;
  const EnhancementResult out = wiener_filter(scaled, s.model, s.state);
  for (int m = 0; m < 2; ++m) {
    const Eigen::MatrixXcd expected = scale * base.speech_spec.channels[m];
    CHECK((out.speech_spec.channels[m] - expected).norm() <=
          1e-12 * (1.0 + expected.norm()));
  }
}

TEST_CASE("scalar filter gain never amplifies a bin") {
  const int freq = 4, frames = 5;
  const Spectrogram spec = make_spec(freq, 1, frames, 51);
  JointModel model;
  model.vae = tiny_vae(freq, 2, 52);
  model.speech_spatial = SpatialCovSet(freq, 1);
  model.env.w = uniform_mat(freq, 2, 0.2, 1.0, 53);
  model.env.h = uniform_mat(2, frames, 0.2, 1.0, 54);
  model.env.r = SpatialCovSet(freq, 1);
  McemState state = init_state(model, spec);
  state.z_samples = {state.z_chain};

  const EnhancementResult result = wiener_filter(spec, model, state);
  for (int f = 0; f < freq; ++f)
    for (int t = 0; t < frames; ++t)
      CHECK(std::abs(result.speech_spec.channels[0](f, t)) <=
            (1.0 + 1e-12) * std::abs(spec.channels[0](f, t)));
}

TEST_CASE("diagnostics are finite and shaped per frame") {
  const Setup s = make_setup(2, 61);
  const EnhancementResult result = wiener_filter(s.spec, s.model, s.state);
  CHECK(result.frame_speech_var.size() == s.spec.frames());
  CHECK(result.frame_noise_var.size() == s.spec.frames());
  CHECK(result.frame_speech_var.allFinite());
  CHECK(result.frame_noise_var.allFinite());
  CHECK(result.frame_speech_var.minCoeff() > 0.0);
  CHECK(result.frame_noise_var.minCoeff() > 0.0);
  CHECK(result.speech_clip.channels() == 2);
  CHECK(result.speech_clip.sample_rate == s.spec.sample_rate);
}

TEST_CASE("wiener rejects missing samples and mismatched models") {
  const Setup s = make_setup(2, 71);
  McemState empty = s.state;
  empty.z_samples.clear();
  CHECK_THROWS_AS(wiener_filter(s.spec, s.model, empty), DataError);

  McemState short_g = s.state;
  short_g.g = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(wiener_filter(s.spec, s.model, short_g), DataError);

  const Spectrogram other = make_spec(7, 2, s.spec.frames(), 72);
  CHECK_THROWS_AS(wiener_filter(other, s.model, s.state), DataError);

  McemState bad_z = s.state;
  bad_z.z_samples[0] = Eigen::MatrixXd::Zero(s.spec.frames(), 9);
  CHECK_THROWS_AS(wiener_filter(s.spec, s.model, bad_z), DataError);
}
