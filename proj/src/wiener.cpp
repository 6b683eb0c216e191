// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/wiener.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include <fmt/format.h>

#include "mcse/common.hpp"
#include "mcse/mnmf.hpp"
#include "mcse/vae.hpp"

namespace mcse {
namespace {

using Cplx = std::complex<double>;

struct H2 {
  double a;
  double c;
  Cplx b;
};

inline H2 h2_of(Eigen::Ref<const Eigen::MatrixXcd> m) {
  return {m(0, 0).real(), m(1, 1).real(), m(0, 1)};
}

}  // namespace

EnhancementResult wiener_filter(const Spectrogram& spec, const JointModel& model,
                                const McemState& state) {
  spec.validate();
  const int freq = spec.freq_bins();
  const int frames = spec.frames();
  const int chans = spec.num_channels();
  if (model.vae.freq_bins != freq ||
      model.speech_spatial.freq_bins() != freq ||
      model.speech_spatial.channels() != chans)
    throw DataError("wiener: model does not match the mixture dimensions");
  if (state.g.size() != frames)
    throw DataError("wiener: state does not match the mixture frame count");
  if (state.z_samples.empty())
    throw DataError("wiener: no posterior samples; run inference first");

  const int samples = static_cast<int>(state.z_samples.size());
  std::vector<Eigen::MatrixXd> sigma2;
  sigma2.reserve(static_cast<std::size_t>(samples));
  for (const Eigen::MatrixXd& z : state.z_samples) {
    if (z.rows() != frames || z.cols() != model.vae.latent_dim)
      throw DataError("wiener: posterior sample shape mismatch");
    sigma2.push_back(decode_batch(model.vae, z));
  }

  Eigen::MatrixXd lam_e, lam_b;
  if (!model.ego.empty()) lam_e = model.ego.w * model.ego.h;
  if (!model.env.empty()) lam_b = model.env.w * model.env.h;
  const bool no_noise = model.ego.empty() && model.env.empty();

  EnhancementResult result;
  result.speech_spec = spec;
  result.frame_speech_var = Eigen::VectorXd::Zero(frames);
  result.frame_noise_var = Eigen::VectorXd::Zero(frames);

  const std::vector<Eigen::MatrixXcd> slices = frequency_slices(spec);
  const double diag_norm = 1.0 / (static_cast<double>(freq) * chans);

  for (int f = 0; f < freq; ++f) {
    const Eigen::MatrixXcd& x = slices[f];
    if (chans == 2) {
      const H2 rs = h2_of(model.speech_spatial.at(f));
      H2 re{0, 0, 0}, rb{0, 0, 0};
      if (!model.ego.empty()) re = h2_of(model.ego.r.at(f));
      if (!model.env.empty()) rb = h2_of(model.env.r.at(f));
      for (int t = 0; t < frames; ++t) {
        double na = 0.0, nc = 0.0;
        Cplx nb(0.0, 0.0);
        if (!model.ego.empty()) {
          const double le = lam_e(f, t);
          na += le * re.a;
          nc += le * re.c;
          nb += le * re.b;
        }
        if (!model.env.empty()) {
          const double lb = lam_b(f, t);
          na += lb * rb.a;
          nc += lb * rb.c;
          nb += lb * rb.b;
        }
        result.frame_noise_var(t) += diag_norm * (na + nc);
        double mean_s = 0.0;
        Cplx w00(0, 0), w01(0, 0), w10(0, 0), w11(0, 0);
        for (int r = 0; r < samples; ++r) {
          const double s = state.g(t) * sigma2[r](t, f);
          mean_s += s;
          if (no_noise) continue;
          const double spa = s * rs.a, spc = s * rs.c;
          const Cplx spb = s * rs.b;
          const double sga = spa + na, sgc = spc + nc;
          const Cplx sgb = spb + nb;
          const double det = sga * sgc - std::norm(sgb);
          if (!(det > 0.0) || !std::isfinite(det))
            throw NumericalError(fmt::format(
                "wiener: mixture covariance singular at bin {}, frame {}", f,
                t));
          const double id = 1.0 / det;
          const double ia = sgc * id, ic = sga * id;
          const Cplx ib = -sgb * id;
          w00 += spa * ia + spb * std::conj(ib);
          w01 += spa * ib + spb * ic;
          w10 += std::conj(spb) * ia + spc * std::conj(ib);
          w11 += std::conj(spb) * ib + spc * ic;
        }
        result.frame_speech_var(t) +=
            diag_norm * (rs.a + rs.c) * mean_s / samples;
        if (no_noise) continue;
        const double inv_r = 1.0 / samples;
        const Cplx x0 = x(0, t), x1 = x(1, t);
        result.speech_spec.channels[0](f, t) = inv_r * (w00 * x0 + w01 * x1);
        result.speech_spec.channels[1](f, t) = inv_r * (w10 * x0 + w11 * x1);
      }
      continue;
    }

    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(chans, chans);
    Eigen::MatrixXcd noise(chans, chans), sp(chans, chans), sig(chans, chans);
    Eigen::MatrixXcd filt(chans, chans);
    for (int t = 0; t < frames; ++t) {
      noise.setZero();
      if (!model.ego.empty()) noise += lam_e(f, t) * model.ego.r.at(f);
      if (!model.env.empty()) noise += lam_b(f, t) * model.env.r.at(f);
      result.frame_noise_var(t) += diag_norm * noise.trace().real();
      filt.setZero();
      double mean_s = 0.0;
      for (int r = 0; r < samples; ++r) {
        const double s = state.g(t) * sigma2[r](t, f);
        mean_s += s;
        if (no_noise) continue;
        sp = s * model.speech_spatial.at(f);
        sig = sp + noise;
        Eigen::LLT<Eigen::MatrixXcd> llt(sig);
        if (llt.info() != Eigen::Success)
          throw NumericalError(fmt::format(
              "wiener: mixture covariance singular at bin {}, frame {}", f, t));
        filt += sp * llt.solve(eye);
      }
      result.frame_speech_var(t) +=
          diag_norm * model.speech_spatial.at(f).trace().real() * mean_s /
          samples;
      if (no_noise) continue;
      const Eigen::VectorXcd s_hat = (filt * x.col(t)) / samples;
      for (int m = 0; m < chans; ++m)
        result.speech_spec.channels[m](f, t) = s_hat(m);
    }
  }

  result.speech_spec.validate();
  result.speech_clip = istft(result.speech_spec);
  return result;
}

}  // namespace mcse
