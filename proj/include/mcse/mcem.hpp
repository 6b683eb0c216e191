// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcse/mnmf.hpp"
#include "mcse/stft.hpp"
#include "mcse/vae.hpp"

namespace mcse {

// How the noise model is adapted at enhancement time: `fixed` keeps the
// pre-trained templates and spatial covariances and adapts activations only,
// `adaptive` learns the whole noise model from the mixture, and `partial`
// combines a frozen pre-trained part with a free background part.
enum class Scheme { kFixed, kAdaptive, kPartial };

Scheme scheme_from_string(const std::string& name);
std::string to_string(Scheme scheme);

struct SchemeConfig {
  Scheme scheme = Scheme::kPartial;
  int dict_size = 96;  // total rank K = ego_rank + bg_rank
  int ego_rank = 64;   // pre-trained part
  int bg_rank = 32;    // freely adapted part
  int em_iters = 100;
  int r_samples = 10;  // latent samples kept per E-step
  int burn_in = 30;    // discarded MH steps per E-step
  double proposal_std = 0.0;  // 0 selects the default 0.01 * sqrt(L)
  std::uint64_t rng_seed = 0;
  double stop_tol = 1e-4;  // relative loss change considered converged
  int stop_window = 5;     // consecutive converged iterations before stopping

  // Splits the total rank for the given scheme: the freely adapted part gets
  // min(32, K/2) under `partial`, everything under `adaptive`, nothing under
  // `fixed`.
  static SchemeConfig make(Scheme scheme, int dict_size);
  void validate() const;
};

// Templates, activations and per-frequency spatial covariances of one noise
// component. A component with zero rank is absent.
struct NoiseComponentModel {
  Eigen::MatrixXd w;  // F x K
  Eigen::MatrixXd h;  // K x T
  SpatialCovSet r;

  bool empty() const { return w.size() == 0; }
  Eigen::Index rank() const { return w.cols(); }
};

// Speech prior plus the two noise components of the mixture model. The ego
// component's templates and spatial covariances stay frozen during
// inference; only its activations adapt.
struct JointModel {
  VaeModel vae;
  SpatialCovSet speech_spatial;  // R_S per frequency
  NoiseComponentModel ego;
  NoiseComponentModel env;
};

// Mutable quantities of the EM run: per-frame gains, the MH chain state,
// the latent samples of the current iteration, and the run histories.
struct McemState {
  Eigen::VectorXd g;                        // per-frame speech gain, > 0
  Eigen::MatrixXd z_chain;                  // T x L current chain state
  std::vector<Eigen::MatrixXd> z_samples;   // r_samples entries of T x L
  std::vector<double> loss_history;         // surrogate loss per iteration
  std::vector<double> accept_history;       // MH acceptance rate per iteration
};

// Builds a scheme-consistent model for the given mixture. `ego` must be
// non-null for the fixed and partial schemes and is ignored under adaptive.
// Free parameters are seeded from cfg.rng_seed.
JointModel make_joint_model(const Spectrogram& spec, const VaeModel& prior,
                            const EgoModel* ego, const SchemeConfig& cfg);

// Fresh state: unit gains, chain at the encoder mean of the reference
// channel's power spectrum, empty histories.
McemState init_state(const JointModel& model, const Spectrogram& spec);

// Model covariance g_t sigma^2_f(z_t) R_S,f + lambda_E R_E,f + lambda_B R_B,f.
Eigen::MatrixXcd mixture_cov(const JointModel& model, const McemState& state,
                             const Eigen::VectorXd& z_t, int f, int t);

// One E-step: per frame, burn_in + r_samples Metropolis-Hastings steps with
// a Gaussian random-walk proposal targeting p(z_t | x, theta); the last
// r_samples chain states are kept. Returns the acceptance rate.
double e_step_sample(const JointModel& model, McemState& state,
                     const Spectrogram& spec, const SchemeConfig& cfg,
                     std::uint64_t iter_seed);

// One M-step over the frozen latent samples: multiplicative updates of g,
// the background templates/activations and the ego activations, Riccati
// updates of the speech and background spatial covariances, then
// covariance-preserving renormalization. Never touches the ego templates or
// ego spatial covariances.
void m_step(JointModel& model, McemState& state, const Spectrogram& spec,
            const SchemeConfig& cfg);

// Sum over samples, frequencies and frames of
//   x^H Sigma^{-1} x + log det Sigma
// evaluated at the state's latent samples; the quantity each M-step
// decreases.
double surrogate_loss(const JointModel& model, const McemState& state,
                      const Spectrogram& spec);

using McemLogger = std::function<void(const std::string&)>;

// Alternates E- and M-steps for up to em_iters iterations with early
// stopping once the relative loss change stays below stop_tol for
// stop_window consecutive iterations. Deterministic given cfg.rng_seed.
McemState run_mcem(const Spectrogram& spec, JointModel& model,
                   const SchemeConfig& cfg, const McemLogger& log = {});

// Generic symmetric random-walk Metropolis-Hastings kernel; advances z in
// place for `steps` updates and returns the number of accepted moves.
// The E-step applies exactly this rule per frame.
int mh_random_walk(Eigen::VectorXd& z,
                   const std::function<double(const Eigen::VectorXd&)>& log_target,
                   double proposal_std, int steps, Rng& rng);

}  // namespace mcse
