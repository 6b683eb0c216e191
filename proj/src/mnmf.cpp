// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/mnmf.hpp"

#include <cmath>
#include <complex>
#include <random>

#include <fmt/format.h>

#include "mcse/checkpoint.hpp"
#include "mcse/common.hpp"

namespace mcse {
namespace {

using Eigen::Index;
using Cplx = std::complex<double>;

void check_hermitian(const Eigen::MatrixXcd& m, const char* what) {
  const double scale = std::max(m.norm(), 1.0);
  if ((m - m.adjoint()).norm() > 1e-8 * scale)
    throw DataError(fmt::format("riccati: {} matrix is not Hermitian", what));
}

double logdet_llt(const Eigen::LLT<Eigen::MatrixXcd>& llt) {
  double acc = 0.0;
  const auto& l = llt.matrixLLT();
  for (Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i).real());
  return 2.0 * acc;
}

}  // namespace

void NmfFactor::validate() const {
  if (w.rows() < 1 || w.cols() < 1 || h.cols() < 1)
    throw DataError("nmf factor: empty templates or activations");
  if (h.rows() != w.cols())
    throw DataError(fmt::format("nmf factor: {} templates but {} activation rows",
                                w.cols(), h.rows()));
  if (!w.allFinite() || !h.allFinite())
    throw DataError("nmf factor: non-finite entries");
  if ((w.array() < 0.0).any() || (h.array() < 0.0).any())
    throw DataError("nmf factor: negative entries");
}

SpatialCovSet::SpatialCovSet(int freq_bins, int channels)
    : freq_bins_(freq_bins), channels_(channels) {
  if (freq_bins < 1 || channels < 1)
    throw DataError("spatial covariance set: nonpositive dimensions");
  store_.assign(static_cast<std::size_t>(freq_bins) * channels * channels,
                Cplx(0.0, 0.0));
  for (int f = 0; f < freq_bins; ++f) at(f).setIdentity();
}

Eigen::Map<Eigen::MatrixXcd> SpatialCovSet::at(int f) {
  return {store_.data() + static_cast<std::ptrdiff_t>(f) * channels_ * channels_,
          channels_, channels_};
}

Eigen::Map<const Eigen::MatrixXcd> SpatialCovSet::at(int f) const {
  return {store_.data() + static_cast<std::ptrdiff_t>(f) * channels_ * channels_,
          channels_, channels_};
}

void SpatialCovSet::validate() const {
  if (freq_bins_ < 1 || channels_ < 1)
    throw DataError("spatial covariance set: empty");
  for (int f = 0; f < freq_bins_; ++f) {
    const auto r = at(f);
    if (!r.allFinite())
      throw DataError(fmt::format(
          "spatial covariance set: non-finite entries at frequency bin {}", f));
    const double scale = std::max(r.norm(), 1.0);
    if ((r - r.adjoint()).norm() > 1e-8 * scale)
      throw DataError(fmt::format(
          "spatial covariance set: not Hermitian at frequency bin {}", f));
  }
}

std::vector<Eigen::MatrixXcd> frequency_slices(const Spectrogram& spec) {
  spec.validate();
  const int freq = spec.freq_bins();
  const int frames = spec.frames();
  const int chans = spec.num_channels();
  std::vector<Eigen::MatrixXcd> out(static_cast<std::size_t>(freq));
  for (int f = 0; f < freq; ++f) {
    out[f].resize(chans, frames);
    for (int m = 0; m < chans; ++m)
      out[f].row(m) = spec.channels[static_cast<std::size_t>(m)].row(f);
  }
  return out;
}

Eigen::MatrixXcd solve_riccati(const Eigen::MatrixXcd& a,
                               const Eigen::MatrixXcd& b) {
  const Index m = a.rows();
  if (a.cols() != m || b.rows() != m || b.cols() != m)
    throw DataError("riccati: operands must be square and equally sized");
  if (!a.allFinite() || !b.allFinite())
    throw DataError("riccati: non-finite operand");
  check_hermitian(a, "left");
  check_hermitian(b, "right");

  const Eigen::MatrixXcd ah = 0.5 * (a + a.adjoint());
  const Eigen::MatrixXcd bh = 0.5 * (b + b.adjoint());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ea(ah);
  if (ea.info() != Eigen::Success)
    throw NumericalError("riccati: eigendecomposition of the left matrix failed");
  if (ea.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError(
        fmt::format("riccati: left matrix is not positive definite "
                    "(min eigenvalue {:.3e})",
                    ea.eigenvalues().minCoeff()));
  const Eigen::VectorXd root = ea.eigenvalues().cwiseSqrt();
  const Eigen::MatrixXcd asqrt =
      ea.eigenvectors() * root.asDiagonal() * ea.eigenvectors().adjoint();
  const Eigen::MatrixXcd ainv_sqrt = ea.eigenvectors() *
                                     root.cwiseInverse().asDiagonal() *
                                     ea.eigenvectors().adjoint();

  Eigen::MatrixXcd mid = asqrt * bh * asqrt;
  mid = 0.5 * (mid + mid.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ec(mid);
  if (ec.info() != Eigen::Success)
    throw NumericalError("riccati: eigendecomposition of the core failed");
  const Eigen::VectorXd mid_root = ec.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXcd mid_sqrt =
      ec.eigenvectors() * mid_root.asDiagonal() * ec.eigenvectors().adjoint();

  Eigen::MatrixXcd r = ainv_sqrt * mid_sqrt * ainv_sqrt;
  return 0.5 * (r + r.adjoint());
}

void normalize_spatial_trace(SpatialCovSet& r, Eigen::MatrixXd& w) {
  if (r.freq_bins() != w.rows())
    throw DataError("normalize: spatial set and templates disagree on bins");
  const double chans = static_cast<double>(r.channels());
  for (int f = 0; f < r.freq_bins(); ++f) {
    auto rf = r.at(f);
    const double scale = rf.trace().real() / chans;
    if (scale <= kEpsFloor) continue;
    rf *= 1.0 / scale;
    w.row(f) *= scale;
  }
}

void normalize_dictionary(Eigen::MatrixXd& w, Eigen::MatrixXd& h) {
  if (w.cols() != h.rows())
    throw DataError("normalize: templates and activations disagree on rank");
  for (Index k = 0; k < w.cols(); ++k) {
    const double scale = w.col(k).sum();
    if (scale <= kEpsFloor) continue;
    w.col(k) /= scale;
    h.row(k) *= scale;
  }
}

double mnmf_loss(const Spectrogram& x, const NmfFactor& nmf,
                 const SpatialCovSet& spatial) {
  nmf.validate();
  spatial.validate();
  const std::vector<Eigen::MatrixXcd> slices = frequency_slices(x);
  const int freq = x.freq_bins();
  const int frames = x.frames();
  const int chans = x.num_channels();
  if (nmf.freq_bins() != freq || nmf.frames() != frames)
    throw DataError(fmt::format(
        "mnmf loss: factor is {}x{} but spectrogram is {}x{}", nmf.freq_bins(),
        nmf.frames(), freq, frames));
  if (spatial.freq_bins() != freq || spatial.channels() != chans)
    throw DataError("mnmf loss: spatial set does not match the spectrogram");

  const Eigen::MatrixXd lambda = nmf.w * nmf.h;
  double total = 0.0;
  for (int f = 0; f < freq; ++f) {
    const Eigen::MatrixXcd rf = spatial.at(f);
    Eigen::LLT<Eigen::MatrixXcd> llt(rf);
    if (llt.info() != Eigen::Success)
      throw NumericalError(fmt::format(
          "mnmf loss: spatial covariance not positive definite at frequency bin {}",
          f));
    const double logdet_r = logdet_llt(llt);
    const Eigen::MatrixXcd white = llt.matrixL().solve(slices[f]);
    for (int t = 0; t < frames; ++t) {
      const double lam = std::max(lambda(f, t), kEpsFloor);
      const double term =
          white.col(t).squaredNorm() / lam + chans * std::log(lam);
      if (!std::isfinite(term))
        throw NumericalError(fmt::format(
            "mnmf loss: non-finite contribution at frequency bin {}, frame {}",
            f, t));
      total += term;
    }
    total += frames * logdet_r;
  }
  return total;
}

void EgoTrainConfig::validate() const {
  if (dict_size < 1) throw ConfigError("ego training: dict_size must be >= 1");
  if (sweeps < 1) throw ConfigError("ego training: sweeps must be >= 1");
}

EgoModel train_ego(const Spectrogram& x, const EgoTrainConfig& cfg) {
  cfg.validate();
  const std::vector<Eigen::MatrixXcd> slices = frequency_slices(x);
  const int freq = x.freq_bins();
  const int frames = x.frames();
  const int chans = x.num_channels();
  const int rank = cfg.dict_size;

  Rng rng = make_rng(cfg.rng_seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Eigen::MatrixXd w(freq, rank), h(rank, frames);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  for (Index i = 0; i < h.size(); ++i) h.data()[i] = u(rng);

  // Scale the activations so the initial model power matches the data.
  double mean_pow = 0.0;
  for (const auto& ch : x.channels) mean_pow += ch.squaredNorm();
  mean_pow /= static_cast<double>(freq) * frames * chans;
  const double mean_lam = (w * h).mean();
  if (mean_lam > kEpsFloor && mean_pow > kEpsFloor) h *= mean_pow / mean_lam;

  SpatialCovSet spatial(freq, chans);

  // Cached per-(f, t) whitened power q = x^H R^{-1} x and per-f log det R.
  Eigen::MatrixXd q(freq, frames);
  Eigen::VectorXd logdet_r = Eigen::VectorXd::Zero(freq);
  for (int f = 0; f < freq; ++f)
    q.row(f) = slices[f].colwise().squaredNorm();

  Eigen::MatrixXd lambda = w * h;
  const auto floored = [](const Eigen::MatrixXd& m) {
    return m.array().max(kEpsFloor);
  };
  auto current_loss = [&]() {
    const auto lam = floored(lambda);
    return (q.array() / lam + chans * lam.log()).sum() +
           frames * logdet_r.sum();
  };

  EgoModel model;
  model.loss_history.push_back(current_loss());

  Eigen::MatrixXd num(freq, frames), den(freq, frames);
  for (int sweep = 1; sweep <= cfg.sweeps; ++sweep) {
    // Template update.
    {
      const auto lam = floored(lambda);
      num = (q.array() / lam.square()).matrix();
      den = (chans / lam).matrix();
      const Eigen::MatrixXd grow =
          ((num * h.transpose()).array() /
           (den * h.transpose()).array().max(kEpsFloor))
              .sqrt();
      w.array() *= grow.array();
      lambda.noalias() = w * h;
    }
    // Activation update.
    {
      const auto lam = floored(lambda);
      num = (q.array() / lam.square()).matrix();
      den = (chans / lam).matrix();
      const Eigen::MatrixXd grow =
          ((w.transpose() * num).array() /
           (w.transpose() * den).array().max(kEpsFloor))
              .sqrt();
      h.array() *= grow.array();
      lambda.noalias() = w * h;
    }
    // Spatial update: R_f solves R A R = B with A the summed precision and
    // B the activation-weighted scatter of the data.
    for (int f = 0; f < freq; ++f) {
      const Eigen::MatrixXcd rf = spatial.at(f);
      Eigen::LLT<Eigen::MatrixXcd> llt(rf);
      if (llt.info() != Eigen::Success)
        throw NumericalError(fmt::format(
            "ego training: spatial covariance lost definiteness at frequency "
            "bin {} (sweep {})",
            f, sweep));
      Eigen::MatrixXcd rinv =
          llt.solve(Eigen::MatrixXcd::Identity(chans, chans));
      rinv = 0.5 * (rinv + rinv.adjoint());

      Eigen::MatrixXcd scaled = slices[f];
      for (int t = 0; t < frames; ++t)
        scaled.col(t) /= std::max(lambda(f, t), kEpsFloor);
      const Eigen::MatrixXcd scatter = scaled * slices[f].adjoint();

      spatial.at(f) = solve_riccati(static_cast<double>(frames) * rinv, scatter);
    }
    normalize_spatial_trace(spatial, w);
    normalize_dictionary(w, h);
    lambda.noalias() = w * h;

    // Refresh the cache from the final state of the sweep.
    for (int f = 0; f < freq; ++f) {
      Eigen::LLT<Eigen::MatrixXcd> llt(Eigen::MatrixXcd(spatial.at(f)));
      if (llt.info() != Eigen::Success)
        throw NumericalError(fmt::format(
            "ego training: spatial covariance lost definiteness at frequency "
            "bin {} (sweep {})",
            f, sweep));
      logdet_r(f) = logdet_llt(llt);
      q.row(f) = llt.matrixL().solve(slices[f]).colwise().squaredNorm();
    }

    const double loss = current_loss();
    if (!std::isfinite(loss))
      throw NumericalError(
          fmt::format("ego training: loss became non-finite at sweep {}", sweep));
    model.loss_history.push_back(loss);
  }

  model.nmf.w = std::move(w);
  model.nmf.h = std::move(h);
  model.spatial = std::move(spatial);
  return model;
}

void save_ego(const std::string& path, const EgoModel& model) {
  model.nmf.validate();
  model.spatial.validate();
  const Index freq = model.nmf.freq_bins();
  const Index rank = model.nmf.dict_size();
  const Index frames = model.nmf.frames();
  const int chans = model.spatial.channels();
  if (model.spatial.freq_bins() != freq)
    throw DataError("save_ego: templates and spatial set disagree on bins");

  Checkpoint ck;
  ck.kind = "ego-mnmf";
  ck.meta["freq_bins"] = static_cast<double>(freq);
  ck.meta["dict_size"] = static_cast<double>(rank);
  ck.meta["frames"] = static_cast<double>(frames);
  ck.meta["channels"] = chans;

  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor wr = model.nmf.w;
  ck.set_array("w", {static_cast<std::uint64_t>(freq),
                     static_cast<std::uint64_t>(rank)},
               std::vector<double>(wr.data(), wr.data() + wr.size()));
  RowMajor hr = model.nmf.h;
  ck.set_array("h", {static_cast<std::uint64_t>(rank),
                     static_cast<std::uint64_t>(frames)},
               std::vector<double>(hr.data(), hr.data() + hr.size()));

  std::vector<double> rdata;
  rdata.reserve(static_cast<std::size_t>(freq) * chans * chans * 2);
  for (int f = 0; f < freq; ++f) {
    const auto rf = model.spatial.at(f);
    for (int i = 0; i < chans; ++i)
      for (int j = 0; j < chans; ++j) {
        rdata.push_back(rf(i, j).real());
        rdata.push_back(rf(i, j).imag());
      }
  }
  ck.set_array("spatial",
               {static_cast<std::uint64_t>(freq),
                static_cast<std::uint64_t>(chans),
                static_cast<std::uint64_t>(chans), 2},
               std::move(rdata));
  if (!model.loss_history.empty())
    ck.set_array("loss_history", {model.loss_history.size()},
                 model.loss_history);
  save_checkpoint(path, ck);
}

EgoModel load_ego(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "ego-mnmf")
    throw DataError(fmt::format(
        "{}: expected an ego-mnmf checkpoint, found kind '{}'", path, ck.kind));
  const int freq = static_cast<int>(ck.meta_at("freq_bins"));
  const int rank = static_cast<int>(ck.meta_at("dict_size"));
  const int frames = static_cast<int>(ck.meta_at("frames"));
  const int chans = static_cast<int>(ck.meta_at("channels"));

  EgoModel model;
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  {
    const auto& a = ck.array_at("w");
    if (a.dims.size() != 2 || a.dims[0] != static_cast<std::uint64_t>(freq) ||
        a.dims[1] != static_cast<std::uint64_t>(rank))
      throw DataError(fmt::format("{}: array 'w' has unexpected shape", path));
    model.nmf.w = Eigen::Map<const RowMajor>(a.data.data(), freq, rank);
  }
  {
    const auto& a = ck.array_at("h");
    if (a.dims.size() != 2 || a.dims[0] != static_cast<std::uint64_t>(rank) ||
        a.dims[1] != static_cast<std::uint64_t>(frames))
      throw DataError(fmt::format("{}: array 'h' has unexpected shape", path));
    model.nmf.h = Eigen::Map<const RowMajor>(a.data.data(), rank, frames);
  }
  {
    const auto& a = ck.array_at("spatial");
    if (a.dims.size() != 4 || a.dims[0] != static_cast<std::uint64_t>(freq) ||
        a.dims[1] != static_cast<std::uint64_t>(chans) ||
        a.dims[2] != static_cast<std::uint64_t>(chans) || a.dims[3] != 2)
      throw DataError(
          fmt::format("{}: array 'spatial' has unexpected shape", path));
    model.spatial = SpatialCovSet(freq, chans);
    std::size_t pos = 0;
    for (int f = 0; f < freq; ++f) {
      auto rf = model.spatial.at(f);
      for (int i = 0; i < chans; ++i)
        for (int j = 0; j < chans; ++j) {
          rf(i, j) = Cplx(a.data[pos], a.data[pos + 1]);
          pos += 2;
        }
    }
  }
  if (ck.arrays.count("loss_history") != 0) {
    const auto& a = ck.array_at("loss_history");
    model.loss_history = a.data;
  }
  model.nmf.validate();
  model.spatial.validate();
  return model;
}

}  // namespace mcse
