// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mcse/common.hpp"

namespace mcse {

// Power spectra are floored to this value before any log.
inline constexpr double kPowerFloor = 1e-10;

// Parameter tensors of the speech prior, shared shape-wise by gradients and
// optimizer state. Linear layers store weights as (out x in).
struct VaeParams {
  Eigen::MatrixXd enc_w1, enc_w2, enc_wmu, enc_wlv;
  Eigen::VectorXd enc_b1, enc_b2, enc_bmu, enc_blv;
  Eigen::MatrixXd dec_w1, dec_w2, dec_wout;
  Eigen::VectorXd dec_b1, dec_b2, dec_bout;
};

// Named view into one parameter tensor; used by the optimizer, the
// serializer and the finite-difference loop.
struct TensorView {
  std::string name;
  double* data;
  std::ptrdiff_t size;
};

std::vector<TensorView> tensor_views(VaeParams& p);

// Speech prior: encoder maps a power-spectrum frame to a Gaussian posterior
// over the latent; decoder maps a latent to a per-bin log-variance.
// Encoder: F -> hidden_wide -> hidden_narrow -> {mu, logvar}, tanh hidden,
// linear heads. Decoder mirrors it: L -> hidden_narrow -> hidden_wide -> F.
struct VaeModel {
  int freq_bins = 0;
  int latent_dim = 16;
  int hidden_wide = 512;
  int hidden_narrow = 128;
  VaeParams p;

  // Fan-in-scaled uniform weight init, zero biases.
  static VaeModel init(int freq_bins, int latent_dim, std::uint64_t seed,
                       int hidden_wide = 512, int hidden_narrow = 128);
  void validate() const;
};

// Posterior parameters of q(z|s) for one power-spectrum frame.
// Variance is strictly positive (exp of the log-variance head).
void encode(const VaeModel& model, const Eigen::VectorXd& power_spectrum,
            Eigen::VectorXd& mean, Eigen::VectorXd& variance);

// Speech variance sigma^2_f(z); strictly positive for all finite z.
Eigen::VectorXd decode(const VaeModel& model, const Eigen::VectorXd& z);

// Batched variants, one frame per row.
void encode_batch(const VaeModel& model, const Eigen::MatrixXd& power,
                  Eigen::MatrixXd& mean, Eigen::MatrixXd& logvar);
Eigen::MatrixXd decode_batch(const VaeModel& model, const Eigen::MatrixXd& z);

// KL(N(mu, diag(var)) || N(0, I)).
double gaussian_kl(const Eigen::VectorXd& mu, const Eigen::VectorXd& var);

// One-sample reparameterized ELBO: E_q[log p(s|z)] - KL(q || N(0,I)), with
// the complex-Gaussian likelihood up to its additive constant. The explicit
// eps overload fixes the reparameterization noise.
double elbo(const VaeModel& model, const Eigen::VectorXd& power_spectrum,
            const Eigen::VectorXd& eps);
double elbo(const VaeModel& model, const Eigen::VectorXd& power_spectrum,
            Rng& rng);

// Mean negative ELBO of a batch (rows of `power`) with per-row noise `eps`;
// accumulates analytic gradients into `grads` (overwritten).
double neg_elbo_with_grads(const VaeModel& model, const Eigen::MatrixXd& power,
                           const Eigen::MatrixXd& eps, VaeParams& grads);

struct TrainingConfig {
  double learning_rate = 0.001;
  int batch_size = 128;
  int max_epochs = 100;
  int patience = 5;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct VaeTrainResult {
  VaeModel model;  // best-validation parameters
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;  // 0-based epoch of the returned model
};

// Adam training with early stopping on a 10% validation split.
// Deterministic given cfg.rng_seed. Throws NumericalError on divergence.
VaeTrainResult train(const VaeModel& init, const Eigen::MatrixXd& dataset,
                     const TrainingConfig& cfg);

// Max relative error between analytic gradients and central finite
// differences of the negative ELBO, with frozen reparameterization noise.
double grad_check(const VaeModel& model, const Eigen::VectorXd& power_spectrum,
                  double step = 1e-5, std::uint64_t noise_seed = 0);

// Checkpoint I/O (kind "vae"); loss histories stored when present.
void save_vae(const std::string& path, const VaeModel& model,
              const std::vector<double>& train_loss = {},
              const std::vector<double>& val_loss = {});
VaeModel load_vae(const std::string& path);

}  // namespace mcse
