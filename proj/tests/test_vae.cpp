// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/vae.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "mcse/common.hpp"

using namespace mcse;

namespace {

std::string temp_path(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "mcse_vae_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

Eigen::VectorXd random_power(int bins, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.01, 4.0);
  Eigen::VectorXd p(bins);
  for (int i = 0; i < bins; ++i) p(i) = u(rng);
  return p;
}

Eigen::VectorXd draw_eps(int latent, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eps(latent);
  for (int i = 0; i < latent; ++i) eps(i) = normal(rng);
  return eps;
}

// Plain-loop affine + tanh, used as an oracle against the Eigen forward.
Eigen::VectorXd naive_layer(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& in, bool with_tanh) {
  Eigen::VectorXd out(w.rows());
  for (Eigen::Index o = 0; o < w.rows(); ++o) {
    double acc = b(o);
    for (Eigen::Index i = 0; i < w.cols(); ++i) acc += w(o, i) * in(i);
    out(o) = with_tanh ? std::tanh(acc) : acc;
  }
  return out;
}

}  // namespace

TEST_CASE("gaussian_kl closed forms") {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(5);
  Eigen::VectorXd var = Eigen::VectorXd::Ones(5);
  CHECK(gaussian_kl(mu, var) == doctest::Approx(0.0).epsilon(1e-15));

  Eigen::VectorXd m1(1), v1(1);
  m1 << 1.75;
  v1 << 1.0;
  CHECK(gaussian_kl(m1, v1) == doctest::Approx(1.75 * 1.75 / 2.0).epsilon(1e-12));

  // Standard form for a general diagonal Gaussian.
  Eigen::VectorXd m2(2), v2(2);
  m2 << 0.3, -0.8;
  v2 << 0.5, 2.0;
  double want = 0.0;
  for (int i = 0; i < 2; ++i)
    want += 0.5 * (m2(i) * m2(i) + v2(i) - std::log(v2(i)) - 1.0);
  CHECK(gaussian_kl(m2, v2) == doctest::Approx(want).epsilon(1e-12));

  Eigen::VectorXd bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS((void)gaussian_kl(m2, bad), DataError);
  CHECK_THROWS_AS((void)gaussian_kl(m1, v2), DataError);
}

TEST_CASE("encode and decode match a plain-loop recomputation") {
  const VaeModel m = VaeModel::init(5, 3, /*seed=*/99, 7, 4);
  const Eigen::VectorXd p = random_power(5, 7);

  Eigen::VectorXd mean, var;
  encode(m, p, mean, var);

  const Eigen::VectorXd x = p.array().max(kPowerFloor).log();
  const Eigen::VectorXd h1 = naive_layer(m.p.enc_w1, m.p.enc_b1, x, true);
  const Eigen::VectorXd h2 = naive_layer(m.p.enc_w2, m.p.enc_b2, h1, true);
  const Eigen::VectorXd want_mu = naive_layer(m.p.enc_wmu, m.p.enc_bmu, h2, false);
  const Eigen::VectorXd want_lv = naive_layer(m.p.enc_wlv, m.p.enc_blv, h2, false);
  CHECK((mean - want_mu).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((var - want_lv.array().exp().matrix()).cwiseAbs().maxCoeff() < 1e-12);

  const Eigen::VectorXd z = draw_eps(3, 11);
  const Eigen::VectorXd got_var = decode(m, z);
  const Eigen::VectorXd g1 = naive_layer(m.p.dec_w1, m.p.dec_b1, z, true);
  const Eigen::VectorXd g2 = naive_layer(m.p.dec_w2, m.p.dec_b2, g1, true);
  const Eigen::VectorXd lo = naive_layer(m.p.dec_wout, m.p.dec_bout, g2, false);
  CHECK((got_var - lo.array().exp().matrix()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((got_var.array() > 0.0).all());
}

TEST_CASE("decode of z = 0 with a zeroed output layer gives unit variance") {
  VaeModel m = VaeModel::init(6, 2, 3);
  m.p.dec_wout.setZero();
  m.p.dec_bout.setZero();
  const Eigen::VectorXd v = decode(m, Eigen::VectorXd::Zero(2));
  CHECK((v - Eigen::VectorXd::Ones(6)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("encode handles zero power through the floor") {
  const VaeModel m = VaeModel::init(4, 2, 5);
  Eigen::VectorXd mean, var;
  encode(m, Eigen::VectorXd::Zero(4), mean, var);
  CHECK(mean.allFinite());
  CHECK(var.allFinite());
  CHECK((var.array() > 0.0).all());
}

TEST_CASE("elbo matches an independent evaluation of both terms") {
  const VaeModel m = VaeModel::init(9, 4, 1234, 12, 6);
  const Eigen::VectorXd p = random_power(9, 21);
  const Eigen::VectorXd eps = draw_eps(4, 22);

  Eigen::VectorXd mu, var;
  encode(m, p, mu, var);
  const Eigen::VectorXd z = mu + var.cwiseSqrt().cwiseProduct(eps);
  const Eigen::VectorXd sv = decode(m, z);
  double log_lik = 0.0;
  for (int f = 0; f < 9; ++f)
    log_lik -= std::log(sv(f)) + std::max(p(f), kPowerFloor) / sv(f);
  const double want = log_lik - gaussian_kl(mu, var);

  CHECK(std::abs(elbo(m, p, eps) - want) < 1e-10);
}

TEST_CASE("elbo rng overload matches the explicit-noise overload") {
  const VaeModel m = VaeModel::init(6, 3, 77);
  const Eigen::VectorXd p = random_power(6, 3);
  Rng rng = make_rng(313);
  const double with_rng = elbo(m, p, rng);
  const double with_eps = elbo(m, p, draw_eps(3, 313));
  CHECK(with_rng == with_eps);
}

TEST_CASE("analytic gradients match central finite differences") {
  for (std::uint64_t seed : {1ul, 17ul, 202ul}) {
    const VaeModel m = VaeModel::init(12, 3, seed, 16, 8);
    const Eigen::VectorXd p = random_power(12, seed + 50);
    CHECK(grad_check(m, p, 1e-5, seed) < 1e-4);
  }
}

TEST_CASE("gradient is exactly zero at a symmetric point and FD agrees") {
  VaeModel m = VaeModel::init(5, 2, 1, 4, 3);
  for (auto& v : tensor_views(m.p)) std::fill(v.data, v.data + v.size, 0.0);

  // With all parameters zero and unit input power, the decoded variance is
  // exactly one and the posterior is standard normal, so every gradient
  // component vanishes.
  const Eigen::VectorXd p = Eigen::VectorXd::Ones(5);
  const Eigen::VectorXd eps = draw_eps(2, 5);

  VaeParams grads = m.p;
  const Eigen::MatrixXd eps_row = eps.transpose();
  neg_elbo_with_grads(m, p.transpose(), eps_row, grads);
  for (const auto& v : tensor_views(grads))
    for (std::ptrdiff_t i = 0; i < v.size; ++i) CHECK(v.data[i] == 0.0);

  // Finite differences around the same point stay within roundoff.
  const double h = 1e-5;
  VaeModel probe = m;
  auto views = tensor_views(probe.p);
  for (auto& v : views) {
    for (std::ptrdiff_t i = 0; i < v.size; ++i) {
      const double saved = v.data[i];
      v.data[i] = saved + h;
      const double up = -elbo(probe, p, eps);
      v.data[i] = saved - h;
      const double down = -elbo(probe, p, eps);
      v.data[i] = saved;
      CHECK(std::abs((up - down) / (2.0 * h)) < 1e-8);
    }
  }
}

TEST_CASE("finite-difference error shrinks quadratically with the step") {
  const VaeModel m = VaeModel::init(6, 2, 42, 5, 4);
  const Eigen::VectorXd p = random_power(6, 43);
  const Eigen::VectorXd eps = draw_eps(2, 44);

  VaeParams grads = m.p;
  neg_elbo_with_grads(m, p.transpose(), eps.transpose(), grads);
  auto gv = tensor_views(grads);

  auto fd_error_norm = [&](double h) {
    VaeModel probe = m;
    auto views = tensor_views(probe.p);
    double sq = 0.0;
    for (std::size_t k = 0; k < views.size(); ++k) {
      for (std::ptrdiff_t i = 0; i < views[k].size; ++i) {
        const double saved = views[k].data[i];
        views[k].data[i] = saved + h;
        const double up = -elbo(probe, p, eps);
        views[k].data[i] = saved - h;
        const double down = -elbo(probe, p, eps);
        views[k].data[i] = saved;
        const double diff = (up - down) / (2.0 * h) - gv[k].data[i];
        sq += diff * diff;
      }
    }
    return std::sqrt(sq);
  };

  const double err_coarse = fd_error_norm(2e-3);
  const double err_fine = fd_error_norm(1e-3);
  CHECK(err_fine > 0.0);
  const double ratio = err_coarse / err_fine;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("training reduces the loss and is deterministic") {
  const int bins = 12;
  Rng rng = make_rng(9001);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  Eigen::MatrixXd data(48, bins);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = u(rng);

  TrainingConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 48;  // full batch keeps the descent clean
  cfg.max_epochs = 30;
  cfg.patience = 30;
  cfg.rng_seed = 5;

  const VaeModel m0 = VaeModel::init(bins, 3, 8, 16, 8);
  const VaeTrainResult a = train(m0, data, cfg);
  CHECK(a.train_loss.size() == 30);
  CHECK(a.val_loss.size() == 30);
  CHECK(a.train_loss.back() < a.train_loss.front());
  CHECK(a.best_epoch >= 0);
  CHECK(a.best_epoch < 30);

  const VaeTrainResult b = train(m0, data, cfg);
  CHECK(a.train_loss == b.train_loss);
  CHECK(a.val_loss == b.val_loss);
  auto av = tensor_views(const_cast<VaeParams&>(a.model.p));
  auto bv = tensor_views(const_cast<VaeParams&>(b.model.p));
  for (std::size_t k = 0; k < av.size(); ++k)
    for (std::ptrdiff_t i = 0; i < av[k].size; ++i)
      CHECK(av[k].data[i] == bv[k].data[i]);

  TrainingConfig other = cfg;
  other.rng_seed = 6;
  const VaeTrainResult c = train(m0, data, other);
  CHECK(c.train_loss.front() != a.train_loss.front());
}

TEST_CASE("patience stops training once validation stalls") {
  Eigen::MatrixXd data = Eigen::MatrixXd::Ones(16, 6) * 0.5;
  TrainingConfig cfg;
  cfg.learning_rate = 1e-300;  // updates vanish, so validation never improves
  cfg.batch_size = 16;
  cfg.max_epochs = 50;
  cfg.patience = 3;
  cfg.rng_seed = 1;
  const VaeTrainResult r = train(VaeModel::init(6, 2, 2, 5, 4), data, cfg);
  CHECK(r.train_loss.size() == 4);  // one epoch to set the best, then patience
  CHECK(r.best_epoch == 0);
}

TEST_CASE("training copes with a single-frame dataset") {
  Eigen::MatrixXd data = random_power(6, 5).transpose();
  TrainingConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 3;
  cfg.rng_seed = 2;
  const VaeTrainResult r = train(VaeModel::init(6, 2, 3, 5, 4), data, cfg);
  CHECK(r.train_loss.size() <= 3);
  CHECK(!r.train_loss.empty());
}

TEST_CASE("training aborts with a diagnostic when the loss diverges") {
  Eigen::MatrixXd data(8, 6);
  Rng rng = make_rng(7);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = u(rng);
  TrainingConfig cfg;
  cfg.learning_rate = 1e8;
  cfg.batch_size = 8;
  cfg.max_epochs = 20;
  cfg.rng_seed = 3;
  CHECK_THROWS_AS((void)train(VaeModel::init(6, 2, 4, 5, 4), data, cfg),
                  NumericalError);
}

TEST_CASE("training rejects bad configs and datasets") {
  const VaeModel m = VaeModel::init(4, 2, 1);
  Eigen::MatrixXd data = Eigen::MatrixXd::Ones(4, 4);
  TrainingConfig cfg;

  TrainingConfig bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS((void)train(m, data, bad), ConfigError);
  bad = cfg;
  bad.patience = 0;
  CHECK_THROWS_AS((void)train(m, data, bad), ConfigError);

  CHECK_THROWS_AS((void)train(m, Eigen::MatrixXd(0, 4), cfg), DataError);
  CHECK_THROWS_AS((void)train(m, Eigen::MatrixXd::Ones(4, 5), cfg), DataError);
  Eigen::MatrixXd with_nan = data;
  with_nan(1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((void)train(m, with_nan, cfg), DataError);
}

TEST_CASE("vae checkpoints round-trip bit-exactly") {
  const VaeModel m = VaeModel::init(10, 4, 321, 8, 6);
  const std::string path = temp_path("vae_roundtrip.ckpt");
  save_vae(path, m, {3.0, 2.0, 1.5}, {3.1, 2.2, 1.9});
  const VaeModel r = load_vae(path);

  CHECK(r.freq_bins == m.freq_bins);
  CHECK(r.latent_dim == m.latent_dim);
  CHECK(r.hidden_wide == m.hidden_wide);
  CHECK(r.hidden_narrow == m.hidden_narrow);
  auto av = tensor_views(const_cast<VaeParams&>(m.p));
  auto bv = tensor_views(const_cast<VaeParams&>(r.p));
  for (std::size_t k = 0; k < av.size(); ++k) {
    REQUIRE(av[k].size == bv[k].size);
    for (std::ptrdiff_t i = 0; i < av[k].size; ++i)
      CHECK(av[k].data[i] == bv[k].data[i]);
  }

  const Eigen::VectorXd p = random_power(10, 77);
  Eigen::VectorXd mu_a, var_a, mu_b, var_b;
  encode(m, p, mu_a, var_a);
  encode(r, p, mu_b, var_b);
  CHECK(mu_a == mu_b);
  CHECK(var_a == var_b);
}

TEST_CASE("load_vae rejects checkpoints of another kind") {
  const VaeModel m = VaeModel::init(4, 2, 9);
  const std::string path = temp_path("vae_kind.ckpt");
  save_vae(path, m);
  CHECK_NOTHROW((void)load_vae(path));
  CHECK_THROWS_AS((void)load_vae(temp_path("missing_file.ckpt")), DataError);
}

TEST_CASE("shape errors carry a structured message") {
  const VaeModel m = VaeModel::init(4, 2, 9);
  Eigen::VectorXd mean, var;
  CHECK_THROWS_AS(encode(m, Eigen::VectorXd::Ones(5), mean, var), DataError);
  CHECK_THROWS_AS((void)decode(m, Eigen::VectorXd::Ones(3)), DataError);
  CHECK_THROWS_AS((void)VaeModel::init(0, 2, 1), ConfigError);
}
