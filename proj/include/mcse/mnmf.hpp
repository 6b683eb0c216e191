// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "mcse/stft.hpp"

namespace mcse {

// Nonnegative spectral templates (F x K) and activations (K x T) of one
// noise component; the power envelope is lambda = w * h.
struct NmfFactor {
  Eigen::MatrixXd w;
  Eigen::MatrixXd h;

  Eigen::Index freq_bins() const { return w.rows(); }
  Eigen::Index dict_size() const { return w.cols(); }
  Eigen::Index frames() const { return h.cols(); }
  void validate() const;  // shape agreement, nonnegative, finite
};

// One M x M Hermitian spatial covariance per frequency bin, stored
// contiguously; at(f) maps the f-th matrix without copying.
class SpatialCovSet {
 public:
  SpatialCovSet() = default;
  SpatialCovSet(int freq_bins, int channels);  // identity per bin

  int freq_bins() const { return freq_bins_; }
  int channels() const { return channels_; }
  Eigen::Map<Eigen::MatrixXcd> at(int f);
  Eigen::Map<const Eigen::MatrixXcd> at(int f) const;
  std::complex<double>* data() { return store_.data(); }
  const std::complex<double>* data() const { return store_.data(); }

  void validate() const;  // Hermitian within 1e-8, finite

 private:
  int freq_bins_ = 0;
  int channels_ = 0;
  std::vector<std::complex<double>> store_;
};

// Regroups a spectrogram into one channels x frames matrix per frequency.
std::vector<Eigen::MatrixXcd> frequency_slices(const Spectrogram& spec);

// Solves R A R = B for Hermitian R with A Hermitian positive definite and
// B Hermitian positive semidefinite, via
//   R = A^{-1/2} (A^{1/2} B A^{1/2})^{1/2} A^{-1/2}.
Eigen::MatrixXcd solve_riccati(const Eigen::MatrixXcd& a,
                               const Eigen::MatrixXcd& b);

// Rescales each R_f to trace M, absorbing the factor into row f of w.
// Leaves lambda_ft R_f unchanged.
void normalize_spatial_trace(SpatialCovSet& r, Eigen::MatrixXd& w);

// Rescales each template column of w to unit sum, absorbing the factor into
// the matching row of h. Leaves w * h unchanged. Zero columns are skipped.
void normalize_dictionary(Eigen::MatrixXd& w, Eigen::MatrixXd& h);

// Single-component multichannel NMF of ego noise: the model covariance at
// bin f and frame t is lambda_ft R_f.
struct EgoModel {
  NmfFactor nmf;
  SpatialCovSet spatial;
  std::vector<double> loss_history;  // initial loss, then one entry per sweep
};

// Negative log-likelihood of the spectrogram under (nmf, spatial), up to the
// additive constant that does not depend on the parameters.
double mnmf_loss(const Spectrogram& x, const NmfFactor& nmf,
                 const SpatialCovSet& spatial);

struct EgoTrainConfig {
  int dict_size = 64;
  int sweeps = 50;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Alternating multiplicative updates of w and h plus a Riccati update of
// each R_f. The recorded loss is non-increasing sweep over sweep.
EgoModel train_ego(const Spectrogram& x, const EgoTrainConfig& cfg);

// Checkpoint I/O (kind "ego-mnmf").
void save_ego(const std::string& path, const EgoModel& model);
EgoModel load_ego(const std::string& path);

}  // namespace mcse
