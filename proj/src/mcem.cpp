// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/mcem.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "mcse/common.hpp"

namespace mcse {
namespace {

using Eigen::Index;
using Cplx = std::complex<double>;

// Hermitian 2x2 matrix [[a, b], [conj(b), c]] unpacked for the hot loops.
struct H2 {
  double a;
  double c;
  Cplx b;
};

inline H2 h2_of(Eigen::Ref<const Eigen::MatrixXcd> m) {
  return {m(0, 0).real(), m(1, 1).real(), m(0, 1)};
}

inline double det2(const H2& s) { return s.a * s.c - std::norm(s.b); }

inline H2 inv2(const H2& s, double det) {
  const double id = 1.0 / det;
  return {s.c * id, s.a * id, -s.b * id};
}

// x^H S x for Hermitian S.
inline double quad2(const H2& s, Cplx x0, Cplx x1) {
  return s.a * std::norm(x0) + s.c * std::norm(x1) +
         2.0 * (s.b * (std::conj(x0) * x1)).real();
}

// tr(S R) for Hermitian S, R.
inline double trprod2(const H2& s, const H2& r) {
  return s.a * r.a + s.c * r.c + 2.0 * (s.b * std::conj(r.b)).real();
}

enum class PassWeight { kUnit, kSigma, kGainSigma, kLambdaB };

// Everything the per-frequency scans read; all parameters are fixed for the
// duration of one scan.
struct MixCtx {
  const std::vector<Eigen::MatrixXcd>& slices;  // per f: channels x frames
  const JointModel& model;
  const Eigen::VectorXd& g;
  const Eigen::MatrixXd* lam_e;  // F x T, null when the component is absent
  const Eigen::MatrixXd* lam_b;
  const std::vector<Eigen::MatrixXd>* sigma2;  // per sample: T x F variances
  int chans;
  int frames;
};

// Weight applied to the trace pair of sample r at (f, t).
inline double trace_weight(PassWeight w, const MixCtx& c, int f, int t, int r) {
  return w == PassWeight::kUnit ? 1.0 : (*c.sigma2)[r](t, f);
}

// Accumulates tm[t] += w * u^H Rc u and ti[t] += w * tr(Sigma^{-1} Rc) over
// all samples, where u = Sigma^{-1} x_ft. Buffers must be zeroed by the
// caller when accumulation across frequencies is not intended.
void scan_traces(const MixCtx& c, int f, Eigen::Ref<const Eigen::MatrixXcd> rc,
                 PassWeight weight, double* tm, double* ti) {
  const Eigen::MatrixXcd& x = c.slices[f];
  const int samples = static_cast<int>(c.sigma2->size());
  if (c.chans == 2) {
    const H2 rs = h2_of(c.model.speech_spatial.at(f));
    const H2 rcs = h2_of(rc);
    H2 re{0, 0, 0}, rb{0, 0, 0};
    if (c.lam_e != nullptr) re = h2_of(c.model.ego.r.at(f));
    if (c.lam_b != nullptr) rb = h2_of(c.model.env.r.at(f));
    for (int t = 0; t < c.frames; ++t) {
      double na = 0.0, nc = 0.0;
      Cplx nb(0.0, 0.0);
      if (c.lam_e != nullptr) {
        const double le = (*c.lam_e)(f, t);
        na += le * re.a;
        nc += le * re.c;
        nb += le * re.b;
      }
      if (c.lam_b != nullptr) {
        const double lb = (*c.lam_b)(f, t);
        na += lb * rb.a;
        nc += lb * rb.c;
        nb += lb * rb.b;
      }
      const Cplx x0 = x(0, t), x1 = x(1, t);
      const double gt = c.g(t);
      for (int r = 0; r < samples; ++r) {
        const double s = gt * (*c.sigma2)[r](t, f);
        const H2 sig{s * rs.a + na, s * rs.c + nc, s * rs.b + nb};
        const H2 inv = inv2(sig, det2(sig));
        const Cplx u0 = inv.a * x0 + inv.b * x1;
        const Cplx u1 = std::conj(inv.b) * x0 + inv.c * x1;
        const double w = trace_weight(weight, c, f, t, r);
        tm[t] += w * quad2(rcs, u0, u1);
        ti[t] += w * trprod2(inv, rcs);
      }
    }
    return;
  }

  const int m = c.chans;
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(m, m);
  Eigen::MatrixXcd noise(m, m), sig(m, m), inv(m, m);
  Eigen::VectorXcd u(m);
  for (int t = 0; t < c.frames; ++t) {
    noise.setZero();
    if (c.lam_e != nullptr) noise += (*c.lam_e)(f, t) * c.model.ego.r.at(f);
    if (c.lam_b != nullptr) noise += (*c.lam_b)(f, t) * c.model.env.r.at(f);
    for (int r = 0; r < samples; ++r) {
      const double s = c.g(t) * (*c.sigma2)[r](t, f);
      sig = s * c.model.speech_spatial.at(f) + noise;
      Eigen::LLT<Eigen::MatrixXcd> llt(sig);
      if (llt.info() != Eigen::Success)
        throw NumericalError(fmt::format(
            "m-step: mixture covariance lost definiteness at bin {}, frame {}",
            f, t));
      inv = llt.solve(eye);
      u.noalias() = inv * x.col(t);
      const double w = trace_weight(weight, c, f, t, r);
      tm[t] += w * u.dot(rc * u).real();
      ti[t] += w * inv.cwiseProduct(rc.transpose()).sum().real();
    }
  }
}

// Accumulates a += phi * Sigma^{-1} and s_out += phi * u u^H over frames and
// samples at frequency f, with phi = g_t sigma^2 (kGainSigma) or the
// background envelope (kLambdaB).
void scan_mats(const MixCtx& c, int f, PassWeight weight, Eigen::MatrixXcd& a,
               Eigen::MatrixXcd& s_out) {
  const Eigen::MatrixXcd& x = c.slices[f];
  const int samples = static_cast<int>(c.sigma2->size());
  if (c.chans == 2) {
    const H2 rs = h2_of(c.model.speech_spatial.at(f));
    H2 re{0, 0, 0}, rb{0, 0, 0};
    if (c.lam_e != nullptr) re = h2_of(c.model.ego.r.at(f));
    if (c.lam_b != nullptr) rb = h2_of(c.model.env.r.at(f));
    double aa = 0.0, ac = 0.0, sa = 0.0, sc = 0.0;
    Cplx ab(0.0, 0.0), sb(0.0, 0.0);
    for (int t = 0; t < c.frames; ++t) {
      double na = 0.0, nc = 0.0;
      Cplx nb(0.0, 0.0);
      if (c.lam_e != nullptr) {
        const double le = (*c.lam_e)(f, t);
        na += le * re.a;
        nc += le * re.c;
        nb += le * re.b;
      }
      double lb = 0.0;
      if (c.lam_b != nullptr) {
        lb = (*c.lam_b)(f, t);
        na += lb * rb.a;
        nc += lb * rb.c;
        nb += lb * rb.b;
      }
      const Cplx x0 = x(0, t), x1 = x(1, t);
      const double gt = c.g(t);
      for (int r = 0; r < samples; ++r) {
        const double sv = gt * (*c.sigma2)[r](t, f);
        const H2 sig{sv * rs.a + na, sv * rs.c + nc, sv * rs.b + nb};
        const H2 inv = inv2(sig, det2(sig));
        const Cplx u0 = inv.a * x0 + inv.b * x1;
        const Cplx u1 = std::conj(inv.b) * x0 + inv.c * x1;
        const double phi = weight == PassWeight::kGainSigma ? sv : lb;
        aa += phi * inv.a;
        ac += phi * inv.c;
        ab += phi * inv.b;
        sa += phi * std::norm(u0);
        sc += phi * std::norm(u1);
        sb += phi * (u0 * std::conj(u1));
      }
    }
    a(0, 0) += aa;
    a(1, 1) += ac;
    a(0, 1) += ab;
    a(1, 0) += std::conj(ab);
    s_out(0, 0) += sa;
    s_out(1, 1) += sc;
    s_out(0, 1) += sb;
    s_out(1, 0) += std::conj(sb);
    return;
  }

  const int m = c.chans;
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(m, m);
  Eigen::MatrixXcd noise(m, m), sig(m, m), inv(m, m);
  Eigen::VectorXcd u(m);
  for (int t = 0; t < c.frames; ++t) {
    noise.setZero();
    double lb = 0.0;
    if (c.lam_e != nullptr) noise += (*c.lam_e)(f, t) * c.model.ego.r.at(f);
    if (c.lam_b != nullptr) {
      lb = (*c.lam_b)(f, t);
      noise += lb * c.model.env.r.at(f);
    }
    for (int r = 0; r < samples; ++r) {
      const double sv = c.g(t) * (*c.sigma2)[r](t, f);
      sig = sv * c.model.speech_spatial.at(f) + noise;
      Eigen::LLT<Eigen::MatrixXcd> llt(sig);
      if (llt.info() != Eigen::Success)
        throw NumericalError(fmt::format(
            "m-step: mixture covariance lost definiteness at bin {}, frame {}",
            f, t));
      inv = llt.solve(eye);
      u.noalias() = inv * x.col(t);
      const double phi = weight == PassWeight::kGainSigma ? sv : lb;
      a += phi * inv;
      s_out += phi * (u * u.adjoint());
    }
  }
}

// Adds the data log-likelihood -(x^H Sigma^{-1} x + log det Sigma) of every
// frame at frequency f to ll, with decoder variances sig2 (T x F).
void add_loglik(const MixCtx& c, int f, const Eigen::MatrixXd& sig2,
                Eigen::VectorXd& ll) {
  const Eigen::MatrixXcd& x = c.slices[f];
  if (c.chans == 2) {
    const H2 rs = h2_of(c.model.speech_spatial.at(f));
    H2 re{0, 0, 0}, rb{0, 0, 0};
    if (c.lam_e != nullptr) re = h2_of(c.model.ego.r.at(f));
    if (c.lam_b != nullptr) rb = h2_of(c.model.env.r.at(f));
    const double* vf = sig2.data() + static_cast<std::ptrdiff_t>(f) * c.frames;
    for (int t = 0; t < c.frames; ++t) {
      double na = 0.0, nc = 0.0;
      Cplx nb(0.0, 0.0);
      if (c.lam_e != nullptr) {
        const double le = (*c.lam_e)(f, t);
        na += le * re.a;
        nc += le * re.c;
        nb += le * re.b;
      }
      if (c.lam_b != nullptr) {
        const double lb = (*c.lam_b)(f, t);
        na += lb * rb.a;
        nc += lb * rb.c;
        nb += lb * rb.b;
      }
      const double s = c.g(t) * vf[t];
      const H2 sig{s * rs.a + na, s * rs.c + nc, s * rs.b + nb};
      const double det = det2(sig);
      const H2 inv = inv2(sig, det);
      ll(t) -= quad2(inv, x(0, t), x(1, t)) + std::log(det);
    }
    return;
  }

  const int m = c.chans;
  Eigen::MatrixXcd noise(m, m), sig(m, m);
  for (int t = 0; t < c.frames; ++t) {
    noise.setZero();
    if (c.lam_e != nullptr) noise += (*c.lam_e)(f, t) * c.model.ego.r.at(f);
    if (c.lam_b != nullptr) noise += (*c.lam_b)(f, t) * c.model.env.r.at(f);
    sig = c.g(t) * sig2(t, f) * c.model.speech_spatial.at(f) + noise;
    Eigen::LLT<Eigen::MatrixXcd> llt(sig);
    if (llt.info() != Eigen::Success)
      throw NumericalError(fmt::format(
          "likelihood: mixture covariance lost definiteness at bin {}, frame {}",
          f, t));
    double logdet = 0.0;
    for (int i = 0; i < m; ++i) logdet += std::log(llt.matrixLLT()(i, i).real());
    logdet *= 2.0;
    ll(t) -= llt.matrixL().solve(x.col(t)).squaredNorm() + logdet;
  }
}

Eigen::MatrixXd uniform_matrix(Index rows, Index cols, double lo, double hi,
                               std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

MixCtx make_ctx(const std::vector<Eigen::MatrixXcd>& slices,
                const JointModel& model, const Eigen::VectorXd& g,
                const Eigen::MatrixXd* lam_e, const Eigen::MatrixXd* lam_b,
                const std::vector<Eigen::MatrixXd>* sigma2,
                const Spectrogram& spec) {
  return {slices,        model,         g, lam_e, lam_b, sigma2,
          spec.num_channels(), spec.frames()};
}

void check_model(const JointModel& model, const Spectrogram& spec) {
  const int freq = spec.freq_bins();
  const int chans = spec.num_channels();
  const int frames = spec.frames();
  if (model.vae.freq_bins != freq)
    throw ConfigError(fmt::format(
        "joint model: prior expects {} bins but the mixture has {}",
        model.vae.freq_bins, freq));
  if (model.speech_spatial.freq_bins() != freq ||
      model.speech_spatial.channels() != chans)
    throw DataError("joint model: speech spatial set does not match mixture");
  for (const NoiseComponentModel* comp : {&model.ego, &model.env}) {
    if (comp->empty()) continue;
    if (comp->w.rows() != freq || comp->h.cols() != frames ||
        comp->h.rows() != comp->w.cols())
      throw DataError("joint model: noise component shapes do not match mixture");
    if (comp->r.freq_bins() != freq || comp->r.channels() != chans)
      throw DataError("joint model: noise spatial set does not match mixture");
  }
}

double default_proposal_std(const SchemeConfig& cfg, int latent_dim) {
  return cfg.proposal_std > 0.0
             ? cfg.proposal_std
             : 0.01 * std::sqrt(static_cast<double>(latent_dim));
}

}  // namespace

Scheme scheme_from_string(const std::string& name) {
  if (name == "fixed") return Scheme::kFixed;
  if (name == "adaptive") return Scheme::kAdaptive;
  if (name == "partial") return Scheme::kPartial;
  throw ConfigError(fmt::format(
      "unknown scheme '{}' (expected fixed, adaptive or partial)", name));
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kFixed: return "fixed";
    case Scheme::kAdaptive: return "adaptive";
    case Scheme::kPartial: return "partial";
  }
  throw ConfigError("unknown scheme value");
}

SchemeConfig SchemeConfig::make(Scheme scheme, int dict_size) {
  if (dict_size < 1)
    throw ConfigError("scheme config: dict_size must be >= 1");
  SchemeConfig cfg;
  cfg.scheme = scheme;
  cfg.dict_size = dict_size;
  switch (scheme) {
    case Scheme::kFixed:
      cfg.ego_rank = dict_size;
      cfg.bg_rank = 0;
      break;
    case Scheme::kAdaptive:
      cfg.ego_rank = 0;
      cfg.bg_rank = dict_size;
      break;
    case Scheme::kPartial:
      cfg.bg_rank = std::min(32, dict_size / 2);
      cfg.ego_rank = dict_size - cfg.bg_rank;
      if (cfg.bg_rank < 1)
        throw ConfigError("scheme config: partial needs dict_size >= 2");
      break;
  }
  return cfg;
}

void SchemeConfig::validate() const {
  if (dict_size < 1 || ego_rank < 0 || bg_rank < 0)
    throw ConfigError("scheme config: ranks must be nonnegative, K >= 1");
  if (ego_rank + bg_rank != dict_size)
    throw ConfigError(fmt::format(
        "scheme config: K_E + K_B = {} does not match K = {}",
        ego_rank + bg_rank, dict_size));
  switch (scheme) {
    case Scheme::kFixed:
      if (bg_rank != 0 || ego_rank < 1)
        throw ConfigError("scheme config: fixed requires K_B = 0, K_E >= 1");
      break;
    case Scheme::kAdaptive:
      if (ego_rank != 0 || bg_rank < 1)
        throw ConfigError("scheme config: adaptive requires K_E = 0, K_B >= 1");
      break;
    case Scheme::kPartial:
      if (ego_rank < 1 || bg_rank < 1)
        throw ConfigError("scheme config: partial requires K_E >= 1 and K_B >= 1");
      break;
  }
  if (em_iters < 1) throw ConfigError("scheme config: em_iters must be >= 1");
  if (r_samples < 1) throw ConfigError("scheme config: r_samples must be >= 1");
  if (burn_in < 0) throw ConfigError("scheme config: burn_in must be >= 0");
  if (proposal_std < 0.0)
    throw ConfigError("scheme config: proposal_std must be >= 0");
  if (stop_tol < 0.0) throw ConfigError("scheme config: stop_tol must be >= 0");
  if (stop_window < 1)
    throw ConfigError("scheme config: stop_window must be >= 1");
}

JointModel make_joint_model(const Spectrogram& spec, const VaeModel& prior,
                            const EgoModel* ego, const SchemeConfig& cfg) {
  cfg.validate();
  spec.validate();
  prior.validate();
  const int freq = spec.freq_bins();
  const int frames = spec.frames();
  const int chans = spec.num_channels();
  if (prior.freq_bins != freq)
    throw ConfigError(fmt::format(
        "joint model: prior expects {} bins but the mixture has {}",
        prior.freq_bins, freq));

  JointModel model;
  model.vae = prior;
  model.speech_spatial = SpatialCovSet(freq, chans);
  if (cfg.ego_rank > 0) {
    if (ego == nullptr)
      throw ConfigError(fmt::format(
          "scheme '{}' requires a pre-trained ego-noise model",
          to_string(cfg.scheme)));
    ego->nmf.validate();
    ego->spatial.validate();
    if (ego->nmf.dict_size() != cfg.ego_rank)
      throw ConfigError(fmt::format(
          "ego model has {} templates but the scheme expects K_E = {}",
          ego->nmf.dict_size(), cfg.ego_rank));
    if (ego->nmf.freq_bins() != freq)
      throw ConfigError(fmt::format(
          "ego model covers {} bins but the mixture has {}",
          ego->nmf.freq_bins(), freq));
    if (ego->spatial.channels() != chans)
      throw ConfigError(fmt::format(
          "ego model has {} channels but the mixture has {}",
          ego->spatial.channels(), chans));
    model.ego.w = ego->nmf.w;
    model.ego.r = ego->spatial;
    model.ego.h =
        uniform_matrix(cfg.ego_rank, frames, 0.1, 1.0, derive_seed(cfg.rng_seed, 11));
  }
  if (cfg.bg_rank > 0) {
    model.env.w = uniform_matrix(freq, cfg.bg_rank, 0.1, 1.0,
                                 derive_seed(cfg.rng_seed, 12));
    model.env.h = uniform_matrix(cfg.bg_rank, frames, 0.1, 1.0,
                                 derive_seed(cfg.rng_seed, 13));
    model.env.r = SpatialCovSet(freq, chans);
  }
  return model;
}

McemState init_state(const JointModel& model, const Spectrogram& spec) {
  check_model(model, spec);
  McemState state;
  state.g = Eigen::VectorXd::Ones(spec.frames());
  const Eigen::MatrixXd ref_power = spec.channels[0].cwiseAbs2().transpose();
  Eigen::MatrixXd mean, logvar;
  encode_batch(model.vae, ref_power, mean, logvar);
  state.z_chain = mean;
  return state;
}

Eigen::MatrixXcd mixture_cov(const JointModel& model, const McemState& state,
                             const Eigen::VectorXd& z_t, int f, int t) {
  if (f < 0 || f >= model.speech_spatial.freq_bins())
    throw DataError("mixture_cov: frequency index out of range");
  if (t < 0 || t >= state.g.size())
    throw DataError("mixture_cov: frame index out of range");
  const Eigen::VectorXd sigma2 = decode(model.vae, z_t);
  Eigen::MatrixXcd cov =
      state.g(t) * sigma2(f) * Eigen::MatrixXcd(model.speech_spatial.at(f));
  if (!model.ego.empty())
    cov += model.ego.w.row(f).dot(model.ego.h.col(t)) *
           Eigen::MatrixXcd(model.ego.r.at(f));
  if (!model.env.empty())
    cov += model.env.w.row(f).dot(model.env.h.col(t)) *
           Eigen::MatrixXcd(model.env.r.at(f));
  return cov;
}

int mh_random_walk(Eigen::VectorXd& z,
                   const std::function<double(const Eigen::VectorXd&)>& log_target,
                   double proposal_std, int steps, Rng& rng) {
  if (proposal_std < 0.0)
    throw ConfigError("mh_random_walk: proposal_std must be >= 0");
  if (steps < 0) throw ConfigError("mh_random_walk: steps must be >= 0");
  int accepted = 0;
  double current = log_target(z);
  Eigen::VectorXd candidate(z.size());
  for (int step = 0; step < steps; ++step) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < z.size(); ++i)
      candidate(i) = z(i) + proposal_std * normal(rng);
    const double proposed = log_target(candidate);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (std::log(unif(rng)) < proposed - current) {
      z = candidate;
      current = proposed;
      ++accepted;
    }
  }
  return accepted;
}

double e_step_sample(const JointModel& model, McemState& state,
                     const Spectrogram& spec, const SchemeConfig& cfg,
                     std::uint64_t iter_seed) {
  cfg.validate();
  check_model(model, spec);
  const std::vector<Eigen::MatrixXcd> slices = frequency_slices(spec);
  const int frames = spec.frames();
  const int freq = spec.freq_bins();
  const int latent = model.vae.latent_dim;
  if (state.z_chain.rows() != frames || state.z_chain.cols() != latent)
    throw DataError("e-step: chain state does not match mixture and prior");

  Eigen::MatrixXd lam_e, lam_b;
  if (!model.ego.empty()) lam_e = model.ego.w * model.ego.h;
  if (!model.env.empty()) lam_b = model.env.w * model.env.h;
  std::vector<Eigen::MatrixXd> unused;
  const MixCtx ctx = make_ctx(slices, model, state.g,
                              model.ego.empty() ? nullptr : &lam_e,
                              model.env.empty() ? nullptr : &lam_b, &unused,
                              spec);
  const double step_std = default_proposal_std(cfg, latent);

  std::vector<Rng> rngs;
  rngs.reserve(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t)
    rngs.push_back(make_rng(derive_seed(iter_seed, static_cast<std::uint64_t>(t))));

  Eigen::MatrixXd dec = decode_batch(model.vae, state.z_chain);
  Eigen::VectorXd ll = -0.5 * state.z_chain.rowwise().squaredNorm();
  for (int f = 0; f < freq; ++f) add_loglik(ctx, f, dec, ll);

  state.z_samples.clear();
  state.z_samples.reserve(static_cast<std::size_t>(cfg.r_samples));
  Eigen::MatrixXd candidate(frames, latent);
  long accepted = 0;
  const int total_steps = cfg.burn_in + cfg.r_samples;
  for (int step = 0; step < total_steps; ++step) {
    for (int t = 0; t < frames; ++t) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (int l = 0; l < latent; ++l)
        candidate(t, l) = state.z_chain(t, l) + step_std * normal(rngs[t]);
    }
    const Eigen::MatrixXd dec_cand = decode_batch(model.vae, candidate);
    Eigen::VectorXd ll_cand = -0.5 * candidate.rowwise().squaredNorm();
    for (int f = 0; f < freq; ++f) add_loglik(ctx, f, dec_cand, ll_cand);
    for (int t = 0; t < frames; ++t) {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      if (std::log(unif(rngs[t])) < ll_cand(t) - ll(t)) {
        state.z_chain.row(t) = candidate.row(t);
        ll(t) = ll_cand(t);
        ++accepted;
      }
    }
    if (step >= cfg.burn_in) state.z_samples.push_back(state.z_chain);
  }
  return static_cast<double>(accepted) /
         (static_cast<double>(total_steps) * frames);
}

void m_step(JointModel& model, McemState& state, const Spectrogram& spec,
            const SchemeConfig& cfg) {
  cfg.validate();
  check_model(model, spec);
  if (state.z_samples.empty())
    throw DataError("m-step: no latent samples; run an E-step first");
  const std::vector<Eigen::MatrixXcd> slices = frequency_slices(spec);
  const int frames = spec.frames();
  const int freq = spec.freq_bins();
  const int chans = spec.num_channels();

  std::vector<Eigen::MatrixXd> sigma2;
  sigma2.reserve(state.z_samples.size());
  for (const Eigen::MatrixXd& z : state.z_samples)
    sigma2.push_back(decode_batch(model.vae, z));

  Eigen::MatrixXd lam_e, lam_b;
  if (!model.ego.empty()) lam_e = model.ego.w * model.ego.h;
  if (!model.env.empty()) lam_b = model.env.w * model.env.h;
  const MixCtx ctx = make_ctx(slices, model, state.g,
                              model.ego.empty() ? nullptr : &lam_e,
                              model.env.empty() ? nullptr : &lam_b, &sigma2,
                              spec);

  const auto ensure_finite = [](const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite())
      throw NumericalError(
          fmt::format("m-step: {} update produced non-finite values", what));
  };

  // Per-frame gain.
  {
    Eigen::VectorXd num = Eigen::VectorXd::Zero(frames);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(frames);
    for (int f = 0; f < freq; ++f)
      scan_traces(ctx, f, model.speech_spatial.at(f), PassWeight::kSigma,
                  num.data(), den.data());
    state.g.array() *= (num.array().max(kEpsFloor) /
                        den.array().max(kEpsFloor))
                           .sqrt();
    ensure_finite(state.g, "gain");
  }

  Eigen::MatrixXd tm(frames, freq), ti(frames, freq);
  const auto fill_traces = [&](const SpatialCovSet& rc) {
    tm.setZero();
    ti.setZero();
    for (int f = 0; f < freq; ++f)
      scan_traces(ctx, f, rc.at(f), PassWeight::kUnit, tm.col(f).data(),
                  ti.col(f).data());
  };

  // Background templates.
  if (!model.env.empty()) {
    fill_traces(model.env.r);
    const Eigen::MatrixXd num = tm.transpose() * model.env.h.transpose();
    const Eigen::MatrixXd den = ti.transpose() * model.env.h.transpose();
    model.env.w.array() *=
        (num.array().max(kEpsFloor) / den.array().max(kEpsFloor)).sqrt();
    ensure_finite(model.env.w, "background template");
    lam_b.noalias() = model.env.w * model.env.h;
  }
  // Background activations.
  if (!model.env.empty()) {
    fill_traces(model.env.r);
    const Eigen::MatrixXd num = (tm * model.env.w).transpose();
    const Eigen::MatrixXd den = (ti * model.env.w).transpose();
    model.env.h.array() *=
        (num.array().max(kEpsFloor) / den.array().max(kEpsFloor)).sqrt();
    ensure_finite(model.env.h, "background activation");
    lam_b.noalias() = model.env.w * model.env.h;
  }
  // Ego activations; templates and spatial covariances stay frozen.
  if (!model.ego.empty()) {
    fill_traces(model.ego.r);
    const Eigen::MatrixXd num = (tm * model.ego.w).transpose();
    const Eigen::MatrixXd den = (ti * model.ego.w).transpose();
    model.ego.h.array() *=
        (num.array().max(kEpsFloor) / den.array().max(kEpsFloor)).sqrt();
    ensure_finite(model.ego.h, "ego activation");
    lam_e.noalias() = model.ego.w * model.ego.h;
  }

  // Speech spatial covariances.
  {
    Eigen::MatrixXcd acc_a(chans, chans), acc_s(chans, chans);
    for (int f = 0; f < freq; ++f) {
      acc_a.setZero();
      acc_s.setZero();
      scan_mats(ctx, f, PassWeight::kGainSigma, acc_a, acc_s);
      const Eigen::MatrixXcd rs = model.speech_spatial.at(f);
      model.speech_spatial.at(f) = solve_riccati(acc_a, rs * acc_s * rs);
    }
  }
  // Background spatial covariances.
  if (!model.env.empty()) {
    Eigen::MatrixXcd acc_a(chans, chans), acc_s(chans, chans);
    for (int f = 0; f < freq; ++f) {
      acc_a.setZero();
      acc_s.setZero();
      scan_mats(ctx, f, PassWeight::kLambdaB, acc_a, acc_s);
      const Eigen::MatrixXcd rb = model.env.r.at(f);
      model.env.r.at(f) = solve_riccati(acc_a, rb * acc_s * rb);
    }
  }

  // Renormalize: exactly covariance-preserving in every case. The background
  // component follows the pre-training conventions; the speech spatial set
  // admits only a frequency-independent rescaling, absorbed by the gains.
  if (!model.env.empty()) {
    normalize_spatial_trace(model.env.r, model.env.w);
    normalize_dictionary(model.env.w, model.env.h);
  }
  {
    double mean_trace = 0.0;
    for (int f = 0; f < freq; ++f)
      mean_trace += model.speech_spatial.at(f).trace().real();
    mean_trace /= static_cast<double>(freq) * chans;
    if (mean_trace > kEpsFloor) {
      for (int f = 0; f < freq; ++f) model.speech_spatial.at(f) *= 1.0 / mean_trace;
      state.g *= mean_trace;
    }
  }
}

double surrogate_loss(const JointModel& model, const McemState& state,
                      const Spectrogram& spec) {
  check_model(model, spec);
  if (state.z_samples.empty())
    throw DataError("surrogate loss: no latent samples");
  const std::vector<Eigen::MatrixXcd> slices = frequency_slices(spec);
  const int freq = spec.freq_bins();
  const int frames = spec.frames();

  Eigen::MatrixXd lam_e, lam_b;
  if (!model.ego.empty()) lam_e = model.ego.w * model.ego.h;
  if (!model.env.empty()) lam_b = model.env.w * model.env.h;
  std::vector<Eigen::MatrixXd> unused;
  const MixCtx ctx = make_ctx(slices, model, state.g,
                              model.ego.empty() ? nullptr : &lam_e,
                              model.env.empty() ? nullptr : &lam_b, &unused,
                              spec);

  double total = 0.0;
  for (const Eigen::MatrixXd& z : state.z_samples) {
    const Eigen::MatrixXd dec = decode_batch(model.vae, z);
    Eigen::VectorXd ll = Eigen::VectorXd::Zero(frames);
    for (int f = 0; f < freq; ++f) add_loglik(ctx, f, dec, ll);
    total -= ll.sum();
  }
  if (!std::isfinite(total))
    throw NumericalError("surrogate loss: non-finite value");
  return total;
}

McemState run_mcem(const Spectrogram& spec, JointModel& model,
                   const SchemeConfig& cfg, const McemLogger& log) {
  cfg.validate();
  check_model(model, spec);

  // Snapshot the frozen parameters so the contract can be asserted.
  const Eigen::MatrixXd ego_w = model.ego.w;
  std::vector<Cplx> ego_r;
  if (!model.ego.empty())
    ego_r.assign(model.ego.r.data(),
                 model.ego.r.data() + static_cast<std::size_t>(
                                          model.ego.r.freq_bins()) *
                                          model.ego.r.channels() *
                                          model.ego.r.channels());

  McemState state = init_state(model, spec);
  int converged_streak = 0;
  for (int iter = 0; iter < cfg.em_iters; ++iter) {
    const double accept = e_step_sample(
        model, state, spec, cfg,
        derive_seed(cfg.rng_seed, 1000 + static_cast<std::uint64_t>(iter)));
    m_step(model, state, spec, cfg);
    const double loss = surrogate_loss(model, state, spec);
    state.accept_history.push_back(accept);
    state.loss_history.push_back(loss);
    if (log) {
      log(fmt::format("iter={} loss={:.6f} accept={:.4f}", iter, loss, accept));
      if (accept == 0.0)
        log(fmt::format("warning: zero MH acceptance at iteration {}", iter));
    }
    if (cfg.stop_tol > 0.0 && state.loss_history.size() >= 2) {
      const double prev = state.loss_history[state.loss_history.size() - 2];
      const double rel = std::abs(loss - prev) / (1.0 + std::abs(prev));
      converged_streak = rel < cfg.stop_tol ? converged_streak + 1 : 0;
      if (converged_streak >= cfg.stop_window) break;
    }
  }

  if (!model.ego.empty()) {
    const bool w_same = model.ego.w == ego_w;
    bool r_same = true;
    const Cplx* cur = model.ego.r.data();
    for (std::size_t i = 0; i < ego_r.size(); ++i)
      if (cur[i] != ego_r[i]) {
        r_same = false;
        break;
      }
    if (!w_same || !r_same)
      throw NumericalError(
          "internal error: frozen ego parameters changed during inference");
  }
  return state;
}

}  // namespace mcse
