// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "doctest.h"
#include "mcse/common.hpp"
#include "mcse/stft.hpp"

using namespace mcse;
using Cplx = std::complex<double>;

namespace {

double measured_snr_db(const AudioClip& speech, const AudioClip& noise) {
  const double ps = speech.samples.squaredNorm() / speech.samples.size();
  const double pn = noise.samples.squaredNorm() / noise.samples.size();
  return 10.0 * std::log10(ps / pn);
}

// Correlation-matrix distance: 1 - tr(A B) / (||A|| ||B||), zero iff the
// matrices agree up to scale.
double corr_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  const double num = (a * b).trace().real();
  return 1.0 - num / (a.norm() * b.norm());
}

std::string temp_path(const char* name) {
  return std::string("/tmp/mcse_scene_test_") + name;
}

}  // namespace

TEST_CASE("scene spec validation") {
  SceneSpec spec;
  spec.validate();

  SceneSpec bad = spec;
  bad.duration_s = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.channels = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.hop = 3;  // does not divide 1024
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.ego_rank = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.env_diffuseness = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.pitch_min_hz = 300.0;
  bad.pitch_max_hz = 200.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.snr_ego_db = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  // Zero-duration generation requests fail before any synthesis.
  CHECK_THROWS_AS(gen_speech(SceneSpec{.duration_s = 0.0}), ConfigError);

  CHECK(scenario_from_string("ego") == Scenario::kEgo);
  CHECK(scenario_from_string("ego_env") == Scenario::kEgoEnv);
  CHECK(scenario_from_string(to_string(Scenario::kEgoEnv)) ==
        Scenario::kEgoEnv);
  CHECK_THROWS_AS(scenario_from_string("street"), ConfigError);
}

TEST_CASE("ego dictionary is seeded, positive and structured") {
  SceneSpec spec;
  spec.frame_len = 256;
  spec.hop = 64;
  spec.ego_rank = 4;
  spec.ego_spatial_seed = 5;
  const int freq = spec.frame_len / 2 + 1;

  const Eigen::MatrixXd w = ego_dictionary(spec);
  CHECK(w.rows() == freq);
  CHECK(w.cols() == 4);
  CHECK(w.minCoeff() > 0.0);
  for (int k = 0; k < 4; ++k)
    CHECK(w.col(k).mean() == doctest::Approx(1.0).epsilon(1e-12));
  // Narrowband atoms carry a pronounced resonance.
  CHECK(w.col(0).maxCoeff() / w.col(0).mean() > 3.0);
  CHECK(w.col(2).maxCoeff() / w.col(2).mean() > 3.0);

  const Eigen::MatrixXd again = ego_dictionary(spec);
  CHECK(w == again);
  SceneSpec other = spec;
  other.ego_spatial_seed = 6;
  CHECK(ego_dictionary(other) != w);
  // The realization seed does not touch the signature.
  other = spec;
  other.rng_seed = 12345;
  CHECK(ego_dictionary(other) == w);
}

TEST_CASE("ego spatial signature is rank-one plus isotropic loading") {
  SceneSpec spec;
  spec.frame_len = 128;
  spec.hop = 32;
  spec.channels = 3;
  spec.ego_spatial_seed = 17;
  const SpatialCovSet cov = ego_spatial_signature(spec);
  cov.validate();
  const int freq = spec.frame_len / 2 + 1;
  CHECK(cov.freq_bins() == freq);
  for (int f = 0; f < freq; f += 7) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(
        Eigen::MatrixXcd(cov.at(f)));
    // Eigenvalues: {0.05, 0.05, ||a||^2 + 0.05}.
    CHECK(eig.eigenvalues()(0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(eig.eigenvalues()(1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(eig.eigenvalues()(2) > 1.0);
  }
}

TEST_CASE("generated ego noise reproduces the commanded spatial covariance") {
  SceneSpec spec;
  spec.duration_s = 60.0;
  spec.frame_len = 256;
  spec.hop = 64;
  spec.ego_spatial_seed = 3;
  spec.rng_seed = 4;

  const AudioClip clip = gen_ego_noise(spec);
  CHECK(clip.channels() == 2);
  CHECK(clip.num_samples() == 960000);

  const Spectrogram x = stft(clip, spec.frame_len, spec.hop);
  const SpatialCovSet truth = ego_spatial_signature(spec);
  const int freq = spec.frame_len / 2 + 1;
  const int frames = x.frames();
  double worst = 0.0;
  for (int f = 1; f + 1 < freq; ++f) {
    Eigen::MatrixXcd emp = Eigen::MatrixXcd::Zero(2, 2);
    for (int t = 0; t < frames; ++t) {
      Eigen::Vector2cd v(x.channels[0](f, t), x.channels[1](f, t));
      emp += v * v.adjoint();
    }
    emp /= frames;
    worst = std::max(worst, corr_distance(emp, truth.at(f)));
  }
  CHECK(worst < 0.1);
}

TEST_CASE("gating rate zero gives a stationary ego noise") {
  SceneSpec spec;
  spec.duration_s = 10.0;
  spec.frame_len = 256;
  spec.hop = 64;
  spec.ego_gate_rate = 0.0;
  spec.ego_spatial_seed = 9;
  spec.rng_seed = 10;

  const AudioClip clip = gen_ego_noise(spec);
  const Spectrogram x = stft(clip, spec.frame_len, spec.hop);
  const int frames = x.frames();
  std::vector<double> energy;
  for (int t = 4; t < frames - 4; ++t) {
    double e = 0.0;
    for (const auto& ch : x.channels) e += ch.col(t).squaredNorm();
    energy.push_back(e);
  }
  double mean = 0.0;
  for (double e : energy) mean += e;
  mean /= energy.size();
  double var = 0.0;
  for (double e : energy) var += (e - mean) * (e - mean);
  var /= energy.size();
  CHECK(std::sqrt(var) / mean < 0.2);

  // A positive gating rate produces distinctly burstier output.
  SceneSpec gated = spec;
  gated.ego_gate_rate = 3.0;
  const AudioClip clip2 = gen_ego_noise(gated);
  CHECK(clip2.samples != clip.samples);
}

TEST_CASE("noise generator clip edges stay at the body level") {
  // Both noise generators synthesize spectra directly in the frequency
  // domain, where the inverse transform's partial-overlap edge normalization
  // would amplify the first and last frames without bound. The generators
  // must hand back only fully-overlapped samples.
  SceneSpec spec;
  spec.duration_s = 2.0;
  spec.rng_seed = 77;
  spec.ego_gate_rate = 0.0;  // stationary, so tight bounds are meaningful
  for (const bool env : {false, true}) {
    const AudioClip clip = env ? gen_env_noise(spec) : gen_ego_noise(spec);
    const Eigen::Index n = clip.num_samples();
    const Eigen::Index edge = spec.frame_len;
    REQUIRE(n > 4 * edge);
    const auto mean_power = [&](const Eigen::MatrixXd& block) {
      return block.squaredNorm() / static_cast<double>(block.size());
    };
    const double body = mean_power(clip.samples.middleCols(edge, n - 2 * edge));
    const double head = mean_power(clip.samples.leftCols(edge));
    const double tail = mean_power(clip.samples.rightCols(edge));
    CHECK(head < 4.0 * body);
    CHECK(tail < 4.0 * body);
    CHECK(head > 0.05 * body);
    CHECK(tail > 0.05 * body);
  }
}

TEST_CASE("environmental noise is diffuse and tilted") {
  SceneSpec spec;
  spec.duration_s = 30.0;
  spec.frame_len = 256;
  spec.hop = 64;
  spec.rng_seed = 21;
  spec.env_tilt_db = -12.0;

  const AudioClip clip = gen_env_noise(spec);
  const Spectrogram x = stft(clip, spec.frame_len, spec.hop);
  const int freq = spec.frame_len / 2 + 1;
  const int frames = x.frames();
  double mean_coh = 0.0;
  Eigen::VectorXd band_power = Eigen::VectorXd::Zero(freq);
  int bins = 0;
  for (int f = 1; f + 1 < freq; ++f) {
    double p00 = 0.0, p11 = 0.0;
    Cplx p01(0.0, 0.0);
    for (int t = 0; t < frames; ++t) {
      const Cplx a = x.channels[0](f, t), b = x.channels[1](f, t);
      p00 += std::norm(a);
      p11 += std::norm(b);
      p01 += a * std::conj(b);
    }
    band_power(f) = (p00 + p11) / (2.0 * frames);
    mean_coh += std::abs(p01) / std::sqrt(p00 * p11);
    ++bins;
  }
  mean_coh /= bins;
  CHECK(mean_coh < 0.3);

  // Tilted spectrum: the top quarter is well below the bottom quarter.
  const int q = freq / 4;
  const double low = band_power.segment(1, q).mean();
  const double high = band_power.segment(freq - 1 - q, q).mean();
  CHECK(10.0 * std::log10(low / high) > 6.0);

  // A point source (diffuseness 0) is strongly coherent instead.
  SceneSpec point = spec;
  point.duration_s = 8.0;
  point.env_diffuseness = 0.0;
  const AudioClip pclip = gen_env_noise(point);
  const Spectrogram px = stft(pclip, spec.frame_len, spec.hop);
  double coh = 0.0;
  int pbins = 0;
  for (int f = 1; f + 1 < freq; ++f) {
    double p00 = 0.0, p11 = 0.0;
    Cplx p01(0.0, 0.0);
    for (int t = 0; t < px.frames(); ++t) {
      const Cplx a = px.channels[0](f, t), b = px.channels[1](f, t);
      p00 += std::norm(a);
      p11 += std::norm(b);
      p01 += a * std::conj(b);
    }
    coh += std::abs(p01) / std::sqrt(p00 * p11);
    ++pbins;
  }
  CHECK(coh / pbins > 0.9);
}

TEST_CASE("speech surrogate carries harmonics of the commanded pitch") {
  SceneSpec spec;
  spec.duration_s = 2.0;
  spec.pitch_min_hz = 175.0;
  spec.pitch_max_hz = 175.0;
  spec.rng_seed = 31;

  const AudioClip clip = gen_speech(spec);
  CHECK(clip.channels() == 2);
  const Spectrogram x = stft(clip, 1024, 256);
  const int frames = x.frames();

  // Average the power spectrum over the loud (voiced) frames.
  Eigen::VectorXd frame_energy(frames);
  for (int t = 0; t < frames; ++t)
    frame_energy(t) = x.channels[0].col(t).squaredNorm();
  std::vector<double> sorted(frame_energy.data(),
                             frame_energy.data() + frames);
  std::sort(sorted.begin(), sorted.end());
  const double cutoff = sorted[static_cast<std::size_t>(frames / 2)];
  Eigen::VectorXd power = Eigen::VectorXd::Zero(x.freq_bins());
  int used = 0;
  for (int t = 0; t < frames; ++t) {
    if (frame_energy(t) < cutoff) continue;
    power += x.channels[0].col(t).cwiseAbs2();
    ++used;
  }
  REQUIRE(used > 0);

  const double bin_hz = 16000.0 / 1024.0;
  for (int h = 1; h <= 5; ++h) {
    const int b = static_cast<int>(std::lround(h * 175.0 / bin_hz));
    const double peak = power.segment(b - 1, 3).maxCoeff();
    const double valley = power.segment(b + 4, 4).minCoeff();
    CHECK(peak > 3.0 * valley);
  }

  // Alternation gives both loud and soft frames.
  CHECK(sorted.front() < 0.1 * sorted.back());
}

TEST_CASE("mix_at_snr hits the requested ratio") {
  SceneSpec spec;
  spec.duration_s = 1.0;
  spec.rng_seed = 41;
  const AudioClip speech = gen_speech(spec);
  const AudioClip noise = gen_env_noise(spec);

  for (double snr : {-5.0, 0.0, 3.7}) {
    const auto [mixture, scaled] = mix_at_snr(speech, noise, snr);
    CHECK(measured_snr_db(speech, scaled) == doctest::Approx(snr).epsilon(1e-9));
    CHECK((mixture.samples - speech.samples - scaled.samples)
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }

  // Extreme SNR degenerates to the speech alone.
  const auto [quiet, tiny] = mix_at_snr(speech, noise, 200.0);
  CHECK((quiet.samples - speech.samples).norm() <=
        1e-8 * speech.samples.norm());

  AudioClip silent = noise;
  silent.samples.setZero();
  CHECK_THROWS_AS(mix_at_snr(speech, silent, 0.0), DataError);
  CHECK_THROWS_AS(mix_at_snr(silent, noise, 0.0), DataError);
  AudioClip shorter = noise;
  shorter.samples = noise.samples.leftCols(100);
  CHECK_THROWS_AS(mix_at_snr(speech, shorter, 0.0), DataError);
  CHECK_THROWS_AS(
      mix_at_snr(speech, noise, std::numeric_limits<double>::infinity()),
      ConfigError);
}

TEST_CASE("scenes decompose exactly into their stems") {
  SceneSpec spec;
  spec.duration_s = 1.0;
  spec.rng_seed = 51;
  spec.snr_ego_db = -2.0;
  spec.snr_env_db = 0.0;

  const Scene ee = gen_scene(spec, Scenario::kEgoEnv);
  CHECK((ee.mixture.samples - ee.speech.samples - ee.ego.samples -
         ee.env.samples)
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
  CHECK(ee.env.samples.norm() > 0.0);
  CHECK(measured_snr_db(ee.speech, ee.ego) == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(measured_snr_db(ee.speech, ee.env) == doctest::Approx(0.0).epsilon(1e-9));

  const Scene ego_only = gen_scene(spec, Scenario::kEgo);
  CHECK(ego_only.env.samples.norm() == 0.0);
  CHECK((ego_only.mixture.samples - ego_only.speech.samples -
         ego_only.ego.samples)
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
}

TEST_CASE("build_testset is reproducible and draws integer SNRs") {
  SceneSpec base;
  base.duration_s = 0.5;
  const std::vector<Scene> set = build_testset(6, Scenario::kEgoEnv, base, 61);
  REQUIRE(set.size() == 6);
  for (const Scene& s : set) {
    CHECK(s.snr_ego_db >= -5.0);
    CHECK(s.snr_ego_db <= 5.0);
    CHECK(s.snr_ego_db == std::round(s.snr_ego_db));
    CHECK(s.snr_env_db == 0.0);
    CHECK(s.env.samples.norm() > 0.0);
    CHECK(s.mixture.num_samples() == 8000);
  }
  // Distinct scenes, identical rerun.
  CHECK(set[0].mixture.samples != set[1].mixture.samples);
  const std::vector<Scene> again = build_testset(6, Scenario::kEgoEnv, base, 61);
  for (int i = 0; i < 6; ++i)
    CHECK(set[i].mixture.samples == again[i].mixture.samples);

  const std::vector<Scene> ego_set = build_testset(2, Scenario::kEgo, base, 62);
  for (const Scene& s : ego_set) CHECK(s.env.samples.norm() == 0.0);

  CHECK_THROWS_AS(build_testset(0, Scenario::kEgo, base, 1), ConfigError);
}

TEST_CASE("manifest io round-trips") {
  std::vector<SceneInfo> rows;
  for (int i = 0; i < 3; ++i) {
    SceneInfo row;
    row.id = fmt::format("scene_{:04d}", i);
    row.scenario = i % 2 == 0 ? Scenario::kEgoEnv : Scenario::kEgo;
    row.rng_seed = derive_seed(7, i);
    row.snr_ego_db = i - 1.5;
    row.snr_env_db = 0.0;
    rows.push_back(row);
  }
  const std::string path = temp_path("manifest.tsv");
  write_manifest(path, rows);
  const std::vector<SceneInfo> back = read_manifest(path);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].id == rows[i].id);
    CHECK(back[i].scenario == rows[i].scenario);
    CHECK(back[i].rng_seed == rows[i].rng_seed);
    CHECK(back[i].snr_ego_db == doctest::Approx(rows[i].snr_ego_db));
    CHECK(back[i].snr_env_db == doctest::Approx(rows[i].snr_env_db));
  }

  CHECK_THROWS_AS(read_manifest("/nonexistent/manifest.tsv"), DataError);
  const std::string junk = temp_path("junk.tsv");
  {
    std::FILE* f = std::fopen(junk.c_str(), "w");
    std::fputs("not a manifest\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_manifest(junk), DataError);
  std::remove(path.c_str());
  std::remove(junk.c_str());
}
