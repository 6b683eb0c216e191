// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "mcse/checkpoint.hpp"

namespace mcse {
namespace {

Eigen::MatrixXd log_floored(const Eigen::MatrixXd& power) {
  return power.array().max(kPowerFloor).log();
}

// Intermediate activations of one batched forward pass, one frame per row.
struct Forward {
  Eigen::MatrixXd x;        // log power, B x F
  Eigen::MatrixXd h1, h2;   // encoder tanh activations
  Eigen::MatrixXd mu, lv;   // posterior mean / log-variance, B x L
  Eigen::MatrixXd stddev;   // exp(lv / 2)
  Eigen::MatrixXd z;        // reparameterized sample
  Eigen::MatrixXd g1, g2;   // decoder tanh activations
  Eigen::MatrixXd lo;       // decoded log-variance, B x F
  double loss = 0.0;        // mean negative ELBO over the batch
};

Eigen::MatrixXd affine(const Eigen::MatrixXd& in, const Eigen::MatrixXd& w,
                       const Eigen::VectorXd& b) {
  return (in * w.transpose()).rowwise() + b.transpose();
}

Forward run_forward(const VaeModel& m, const Eigen::MatrixXd& power,
                    const Eigen::MatrixXd& eps) {
  if (power.cols() != m.freq_bins)
    throw DataError(fmt::format("vae forward: expected {} frequency bins, got {}",
                                m.freq_bins, power.cols()));
  if (eps.rows() != power.rows() || eps.cols() != m.latent_dim)
    throw DataError("vae forward: noise shape does not match batch");

  Forward f;
  f.x = log_floored(power);
  f.h1 = affine(f.x, m.p.enc_w1, m.p.enc_b1).array().tanh();
  f.h2 = affine(f.h1, m.p.enc_w2, m.p.enc_b2).array().tanh();
  f.mu = affine(f.h2, m.p.enc_wmu, m.p.enc_bmu);
  f.lv = affine(f.h2, m.p.enc_wlv, m.p.enc_blv);
  f.stddev = (0.5 * f.lv.array()).exp();
  f.z = f.mu + f.stddev.cwiseProduct(eps);
  f.g1 = affine(f.z, m.p.dec_w1, m.p.dec_b1).array().tanh();
  f.g2 = affine(f.g1, m.p.dec_w2, m.p.dec_b2).array().tanh();
  f.lo = affine(f.g2, m.p.dec_wout, m.p.dec_bout);

  const auto p = power.array().max(kPowerFloor);
  const double recon = (f.lo.array() + p * (-f.lo.array()).exp()).sum();
  const double kl =
      0.5 * (f.mu.array().square() + f.lv.array().exp() - f.lv.array() - 1.0)
                .sum();
  f.loss = (recon + kl) / static_cast<double>(power.rows());
  return f;
}

VaeParams zeros_like(const VaeModel& m) {
  VaeParams g = m.p;
  for (auto& v : tensor_views(g))
    std::fill(v.data, v.data + v.size, 0.0);
  return g;
}

Eigen::MatrixXd draw_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = normal(rng);
  return out;
}

}  // namespace

std::vector<TensorView> tensor_views(VaeParams& p) {
  std::vector<TensorView> v;
  auto mat = [&](const char* name, Eigen::MatrixXd& m) {
    v.push_back({name, m.data(), m.size()});
  };
  auto vec = [&](const char* name, Eigen::VectorXd& x) {
    v.push_back({name, x.data(), x.size()});
  };
  mat("enc_w1", p.enc_w1);
  vec("enc_b1", p.enc_b1);
  mat("enc_w2", p.enc_w2);
  vec("enc_b2", p.enc_b2);
  mat("enc_wmu", p.enc_wmu);
  vec("enc_bmu", p.enc_bmu);
  mat("enc_wlv", p.enc_wlv);
  vec("enc_blv", p.enc_blv);
  mat("dec_w1", p.dec_w1);
  vec("dec_b1", p.dec_b1);
  mat("dec_w2", p.dec_w2);
  vec("dec_b2", p.dec_b2);
  mat("dec_wout", p.dec_wout);
  vec("dec_bout", p.dec_bout);
  return v;
}

VaeModel VaeModel::init(int freq_bins, int latent_dim, std::uint64_t seed,
                        int hidden_wide, int hidden_narrow) {
  if (freq_bins < 1 || latent_dim < 1 || hidden_wide < 1 || hidden_narrow < 1)
    throw ConfigError("vae init: all layer sizes must be positive");

  VaeModel m;
  m.freq_bins = freq_bins;
  m.latent_dim = latent_dim;
  m.hidden_wide = hidden_wide;
  m.hidden_narrow = hidden_narrow;

  Rng rng = make_rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& w, Eigen::Index out, Eigen::Index in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    w.resize(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  };
  fill(m.p.enc_w1, hidden_wide, freq_bins);
  fill(m.p.enc_w2, hidden_narrow, hidden_wide);
  fill(m.p.enc_wmu, latent_dim, hidden_narrow);
  fill(m.p.enc_wlv, latent_dim, hidden_narrow);
  fill(m.p.dec_w1, hidden_narrow, latent_dim);
  fill(m.p.dec_w2, hidden_wide, hidden_narrow);
  fill(m.p.dec_wout, freq_bins, hidden_wide);
  m.p.enc_b1 = Eigen::VectorXd::Zero(hidden_wide);
  m.p.enc_b2 = Eigen::VectorXd::Zero(hidden_narrow);
  m.p.enc_bmu = Eigen::VectorXd::Zero(latent_dim);
  m.p.enc_blv = Eigen::VectorXd::Zero(latent_dim);
  m.p.dec_b1 = Eigen::VectorXd::Zero(hidden_narrow);
  m.p.dec_b2 = Eigen::VectorXd::Zero(hidden_wide);
  m.p.dec_bout = Eigen::VectorXd::Zero(freq_bins);
  return m;
}

void VaeModel::validate() const {
  if (freq_bins < 1 || latent_dim < 1 || hidden_wide < 1 || hidden_narrow < 1)
    throw DataError("vae model: all layer sizes must be positive");
  auto expect = [](const char* name, Eigen::Index got_r, Eigen::Index got_c,
                   Eigen::Index want_r, Eigen::Index want_c) {
    if (got_r != want_r || got_c != want_c)
      throw DataError(fmt::format("vae model: {} has shape {}x{}, expected {}x{}",
                                  name, got_r, got_c, want_r, want_c));
  };
  expect("enc_w1", p.enc_w1.rows(), p.enc_w1.cols(), hidden_wide, freq_bins);
  expect("enc_w2", p.enc_w2.rows(), p.enc_w2.cols(), hidden_narrow, hidden_wide);
  expect("enc_wmu", p.enc_wmu.rows(), p.enc_wmu.cols(), latent_dim, hidden_narrow);
  expect("enc_wlv", p.enc_wlv.rows(), p.enc_wlv.cols(), latent_dim, hidden_narrow);
  expect("dec_w1", p.dec_w1.rows(), p.dec_w1.cols(), hidden_narrow, latent_dim);
  expect("dec_w2", p.dec_w2.rows(), p.dec_w2.cols(), hidden_wide, hidden_narrow);
  expect("dec_wout", p.dec_wout.rows(), p.dec_wout.cols(), freq_bins, hidden_wide);
  expect("enc_b1", p.enc_b1.size(), 1, hidden_wide, 1);
  expect("enc_b2", p.enc_b2.size(), 1, hidden_narrow, 1);
  expect("enc_bmu", p.enc_bmu.size(), 1, latent_dim, 1);
  expect("enc_blv", p.enc_blv.size(), 1, latent_dim, 1);
  expect("dec_b1", p.dec_b1.size(), 1, hidden_narrow, 1);
  expect("dec_b2", p.dec_b2.size(), 1, hidden_wide, 1);
  expect("dec_bout", p.dec_bout.size(), 1, freq_bins, 1);
  for (const auto& v : tensor_views(const_cast<VaeParams&>(p)))
    for (std::ptrdiff_t i = 0; i < v.size; ++i)
      if (!std::isfinite(v.data[i]))
        throw DataError(fmt::format("vae model: {} contains a non-finite value",
                                    v.name));
}

void encode_batch(const VaeModel& model, const Eigen::MatrixXd& power,
                  Eigen::MatrixXd& mean, Eigen::MatrixXd& logvar) {
  if (power.cols() != model.freq_bins)
    throw DataError(fmt::format("vae encode: expected {} frequency bins, got {}",
                                model.freq_bins, power.cols()));
  const Eigen::MatrixXd x = log_floored(power);
  const Eigen::MatrixXd h1 =
      affine(x, model.p.enc_w1, model.p.enc_b1).array().tanh();
  const Eigen::MatrixXd h2 =
      affine(h1, model.p.enc_w2, model.p.enc_b2).array().tanh();
  mean = affine(h2, model.p.enc_wmu, model.p.enc_bmu);
  logvar = affine(h2, model.p.enc_wlv, model.p.enc_blv);
}

Eigen::MatrixXd decode_batch(const VaeModel& model, const Eigen::MatrixXd& z) {
  if (z.cols() != model.latent_dim)
    throw DataError(fmt::format("vae decode: expected latent dim {}, got {}",
                                model.latent_dim, z.cols()));
  const Eigen::MatrixXd g1 =
      affine(z, model.p.dec_w1, model.p.dec_b1).array().tanh();
  const Eigen::MatrixXd g2 =
      affine(g1, model.p.dec_w2, model.p.dec_b2).array().tanh();
  return affine(g2, model.p.dec_wout, model.p.dec_bout).array().exp();
}

void encode(const VaeModel& model, const Eigen::VectorXd& power_spectrum,
            Eigen::VectorXd& mean, Eigen::VectorXd& variance) {
  Eigen::MatrixXd mu, lv;
  encode_batch(model, power_spectrum.transpose(), mu, lv);
  mean = mu.row(0).transpose();
  variance = lv.row(0).transpose().array().exp();
}

Eigen::VectorXd decode(const VaeModel& model, const Eigen::VectorXd& z) {
  return decode_batch(model, z.transpose()).row(0).transpose();
}

double gaussian_kl(const Eigen::VectorXd& mu, const Eigen::VectorXd& var) {
  if (mu.size() != var.size())
    throw DataError("gaussian_kl: mean and variance sizes differ");
  if ((var.array() <= 0.0).any())
    throw DataError("gaussian_kl: variance must be strictly positive");
  return 0.5 * (mu.array().square() + var.array() - var.array().log() - 1.0)
                   .sum();
}

double elbo(const VaeModel& model, const Eigen::VectorXd& power_spectrum,
            const Eigen::VectorXd& eps) {
  const Forward f =
      run_forward(model, power_spectrum.transpose(), eps.transpose());
  return -f.loss;
}

double elbo(const VaeModel& model, const Eigen::VectorXd& power_spectrum,
            Rng& rng) {
  return elbo(model, power_spectrum, draw_normal(rng, model.latent_dim, 1));
}

double neg_elbo_with_grads(const VaeModel& model, const Eigen::MatrixXd& power,
                           const Eigen::MatrixXd& eps, VaeParams& grads) {
  const Forward f = run_forward(model, power, eps);
  const double inv_b = 1.0 / static_cast<double>(power.rows());
  const auto& m = model.p;

  // Reconstruction head.
  const Eigen::MatrixXd dlo =
      inv_b *
      (1.0 - power.array().max(kPowerFloor) * (-f.lo.array()).exp()).matrix();
  grads.dec_wout = dlo.transpose() * f.g2;
  grads.dec_bout = dlo.colwise().sum().transpose();

  // Decoder hidden layers.
  const Eigen::MatrixXd db2 =
      (dlo * m.dec_wout).cwiseProduct((1.0 - f.g2.array().square()).matrix());
  grads.dec_w2 = db2.transpose() * f.g1;
  grads.dec_b2 = db2.colwise().sum().transpose();
  const Eigen::MatrixXd db1 =
      (db2 * m.dec_w2).cwiseProduct((1.0 - f.g1.array().square()).matrix());
  grads.dec_w1 = db1.transpose() * f.z;
  grads.dec_b1 = db1.colwise().sum().transpose();

  // Through the reparameterization, plus the KL terms.
  const Eigen::MatrixXd dz = db1 * m.dec_w1;
  const Eigen::MatrixXd dmu = dz + inv_b * f.mu;
  const Eigen::MatrixXd dlv =
      0.5 * dz.cwiseProduct(eps).cwiseProduct(f.stddev) +
      (0.5 * inv_b) * (f.lv.array().exp() - 1.0).matrix();

  // Encoder heads and hidden layers.
  grads.enc_wmu = dmu.transpose() * f.h2;
  grads.enc_bmu = dmu.colwise().sum().transpose();
  grads.enc_wlv = dlv.transpose() * f.h2;
  grads.enc_blv = dlv.colwise().sum().transpose();
  const Eigen::MatrixXd dh2 = dmu * m.enc_wmu + dlv * m.enc_wlv;
  const Eigen::MatrixXd da2 =
      dh2.cwiseProduct((1.0 - f.h2.array().square()).matrix());
  grads.enc_w2 = da2.transpose() * f.h1;
  grads.enc_b2 = da2.colwise().sum().transpose();
  const Eigen::MatrixXd da1 =
      (da2 * m.enc_w2).cwiseProduct((1.0 - f.h1.array().square()).matrix());
  grads.enc_w1 = da1.transpose() * f.x;
  grads.enc_b1 = da1.colwise().sum().transpose();

  return f.loss;
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("vae training: learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("vae training: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("vae training: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("vae training: patience must be >= 1");
}

VaeTrainResult train(const VaeModel& init, const Eigen::MatrixXd& dataset,
                     const TrainingConfig& cfg) {
  cfg.validate();
  init.validate();
  if (dataset.rows() < 1)
    throw DataError("vae training: dataset is empty");
  if (dataset.cols() != init.freq_bins)
    throw DataError(fmt::format("vae training: dataset has {} bins, model expects {}",
                                dataset.cols(), init.freq_bins));
  if (!dataset.allFinite())
    throw DataError("vae training: dataset contains non-finite values");

  const Eigen::Index n = dataset.rows();
  const int latent = init.latent_dim;

  // Deterministic split: shuffle once, hold out ~10% (at least one frame).
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng split_rng = make_rng(derive_seed(cfg.rng_seed, 1));
  std::shuffle(order.begin(), order.end(), split_rng);
  const Eigen::Index n_val =
      n < 2 ? 1
            : std::clamp<Eigen::Index>(
                  static_cast<Eigen::Index>(std::lround(0.1 * static_cast<double>(n))),
                  1, n - 1);
  std::vector<Eigen::Index> val_idx(order.begin(), order.begin() + n_val);
  std::vector<Eigen::Index> train_idx =
      n < 2 ? val_idx
            : std::vector<Eigen::Index>(order.begin() + n_val, order.end());

  auto gather = [&dataset](const std::vector<Eigen::Index>& idx,
                           std::size_t lo, std::size_t hi) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(hi - lo), dataset.cols());
    for (std::size_t i = lo; i < hi; ++i)
      out.row(static_cast<Eigen::Index>(i - lo)) = dataset.row(idx[i]);
    return out;
  };
  const Eigen::MatrixXd val_set = gather(val_idx, 0, val_idx.size());

  Rng shuffle_rng = make_rng(derive_seed(cfg.rng_seed, 2));
  Rng noise_rng = make_rng(derive_seed(cfg.rng_seed, 3));
  // Fixed validation noise keeps the early-stopping comparison stable.
  const Eigen::MatrixXd val_eps =
      draw_normal(noise_rng, val_set.rows(), latent);

  VaeModel model = init;
  VaeParams grads = zeros_like(model);
  VaeParams adam_m = zeros_like(model);
  VaeParams adam_v = zeros_like(model);
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long step = 0;

  auto eval_loss = [](const VaeModel& m, const Eigen::MatrixXd& batch,
                      const Eigen::MatrixXd& eps) {
    return run_forward(m, batch, eps).loss;
  };

  VaeTrainResult result;
  result.model = model;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(start + static_cast<std::size_t>(cfg.batch_size),
                   train_idx.size());
      const Eigen::MatrixXd batch = gather(train_idx, start, stop);
      const Eigen::MatrixXd eps = draw_normal(noise_rng, batch.rows(), latent);
      const double loss = neg_elbo_with_grads(model, batch, eps, grads);
      if (!std::isfinite(loss))
        throw NumericalError(
            fmt::format("vae training diverged at epoch {}", epoch));
      epoch_loss += loss * static_cast<double>(batch.rows());

      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto pv = tensor_views(model.p);
      auto gv = tensor_views(grads);
      auto mv = tensor_views(adam_m);
      auto vv = tensor_views(adam_v);
      for (std::size_t k = 0; k < pv.size(); ++k) {
        for (std::ptrdiff_t i = 0; i < pv[k].size; ++i) {
          const double g = gv[k].data[i];
          double& m1 = mv[k].data[i];
          double& m2 = vv[k].data[i];
          m1 = beta1 * m1 + (1.0 - beta1) * g;
          m2 = beta2 * m2 + (1.0 - beta2) * g * g;
          pv[k].data[i] -=
              cfg.learning_rate * (m1 / bc1) / (std::sqrt(m2 / bc2) + adam_eps);
        }
      }
    }
    epoch_loss /= static_cast<double>(train_idx.size());
    const double val_loss = eval_loss(model, val_set, val_eps);
    if (!std::isfinite(val_loss))
      throw NumericalError(
          fmt::format("vae training diverged at epoch {}", epoch));
    result.train_loss.push_back(epoch_loss);
    result.val_loss.push_back(val_loss);

    if (val_loss < best_val) {
      best_val = val_loss;
      result.model = model;
      result.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.patience) {
      break;
    }
  }
  return result;
}

double grad_check(const VaeModel& model, const Eigen::VectorXd& power_spectrum,
                  double step, std::uint64_t noise_seed) {
  if (!(step > 0.0)) throw ConfigError("grad_check: step must be positive");
  Rng rng = make_rng(noise_seed);
  const Eigen::MatrixXd eps = draw_normal(rng, 1, model.latent_dim);
  const Eigen::MatrixXd power = power_spectrum.transpose();

  VaeParams analytic = zeros_like(model);
  neg_elbo_with_grads(model, power, eps, analytic);

  VaeModel probe = model;
  auto pv = tensor_views(probe.p);
  auto av = tensor_views(analytic);
  double worst = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    for (std::ptrdiff_t i = 0; i < pv[k].size; ++i) {
      const double saved = pv[k].data[i];
      pv[k].data[i] = saved + step;
      const double up = run_forward(probe, power, eps).loss;
      pv[k].data[i] = saved - step;
      const double down = run_forward(probe, power, eps).loss;
      pv[k].data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double ga = av[k].data[i];
      const double rel = std::abs(ga - numeric) /
                         std::max({std::abs(ga), std::abs(numeric), 1e-4});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

void save_vae(const std::string& path, const VaeModel& model,
              const std::vector<double>& train_loss,
              const std::vector<double>& val_loss) {
  model.validate();
  Checkpoint ck;
  ck.kind = "vae";
  ck.meta["freq_bins"] = model.freq_bins;
  ck.meta["latent_dim"] = model.latent_dim;
  ck.meta["hidden_wide"] = model.hidden_wide;
  ck.meta["hidden_narrow"] = model.hidden_narrow;

  VaeParams copy = model.p;
  for (const auto& view : tensor_views(copy)) {
    // Matrices are serialized row-major.
    const Eigen::MatrixXd* as_mat = nullptr;
    Eigen::Index rows = 0, cols = 0;
    auto dims_of = [&](const Eigen::MatrixXd& m) {
      as_mat = &m;
      rows = m.rows();
      cols = m.cols();
    };
    if (view.name == "enc_w1") dims_of(copy.enc_w1);
    else if (view.name == "enc_w2") dims_of(copy.enc_w2);
    else if (view.name == "enc_wmu") dims_of(copy.enc_wmu);
    else if (view.name == "enc_wlv") dims_of(copy.enc_wlv);
    else if (view.name == "dec_w1") dims_of(copy.dec_w1);
    else if (view.name == "dec_w2") dims_of(copy.dec_w2);
    else if (view.name == "dec_wout") dims_of(copy.dec_wout);

    if (as_mat != nullptr) {
      using RowMajor =
          Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      RowMajor rm = *as_mat;
      ck.set_array(view.name,
                   {static_cast<std::uint64_t>(rows), static_cast<std::uint64_t>(cols)},
                   std::vector<double>(rm.data(), rm.data() + rm.size()));
    } else {
      ck.set_array(view.name, {static_cast<std::uint64_t>(view.size)},
                   std::vector<double>(view.data, view.data + view.size));
    }
  }
  if (!train_loss.empty())
    ck.set_array("train_loss", {train_loss.size()}, train_loss);
  if (!val_loss.empty())
    ck.set_array("val_loss", {val_loss.size()}, val_loss);
  save_checkpoint(path, ck);
}

VaeModel load_vae(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "vae")
    throw DataError(fmt::format("{}: expected a vae checkpoint, found kind '{}'",
                                path, ck.kind));
  VaeModel m;
  m.freq_bins = static_cast<int>(ck.meta_at("freq_bins"));
  m.latent_dim = static_cast<int>(ck.meta_at("latent_dim"));
  m.hidden_wide = static_cast<int>(ck.meta_at("hidden_wide"));
  m.hidden_narrow = static_cast<int>(ck.meta_at("hidden_narrow"));

  auto load_mat = [&ck, &path](const char* name, Eigen::MatrixXd& out) {
    const Checkpoint::Array& a = ck.array_at(name);
    if (a.dims.size() != 2)
      throw DataError(fmt::format("{}: array '{}' is not a matrix", path, name));
    using RowMajor =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    out = Eigen::Map<const RowMajor>(
        a.data.data(), static_cast<Eigen::Index>(a.dims[0]),
        static_cast<Eigen::Index>(a.dims[1]));
  };
  auto load_vec = [&ck, &path](const char* name, Eigen::VectorXd& out) {
    const Checkpoint::Array& a = ck.array_at(name);
    if (a.dims.size() != 1)
      throw DataError(fmt::format("{}: array '{}' is not a vector", path, name));
    out = Eigen::Map<const Eigen::VectorXd>(a.data.data(),
                                            static_cast<Eigen::Index>(a.dims[0]));
  };
  load_mat("enc_w1", m.p.enc_w1);
  load_vec("enc_b1", m.p.enc_b1);
  load_mat("enc_w2", m.p.enc_w2);
  load_vec("enc_b2", m.p.enc_b2);
  load_mat("enc_wmu", m.p.enc_wmu);
  load_vec("enc_bmu", m.p.enc_bmu);
  load_mat("enc_wlv", m.p.enc_wlv);
  load_vec("enc_blv", m.p.enc_blv);
  load_mat("dec_w1", m.p.dec_w1);
  load_vec("dec_b1", m.p.dec_b1);
  load_mat("dec_w2", m.p.dec_w2);
  load_vec("dec_b2", m.p.dec_b2);
  load_mat("dec_wout", m.p.dec_wout);
  load_vec("dec_bout", m.p.dec_bout);
  m.validate();
  return m;
}

}  // namespace mcse
