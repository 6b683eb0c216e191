#include <cmath>
#include <random>

#include "doctest.h"
#include "mcse/common.hpp"
#include "mcse/metrics.hpp"

using namespace mcse;

namespace {

Eigen::VectorXd random_vec(int n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> dist;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

// Independent evaluation of the projection formula, element-wise loops only.
double si_sdr_bruteforce(const Eigen::VectorXd& r, const Eigen::VectorXd& e) {
  double re = 0.0, rr = 0.0;
  for (int i = 0; i < r.size(); ++i) {
    re += r[i] * e[i];
    rr += r[i] * r[i];
  }
  const double alpha = re / rr;
  double target = 0.0, residual = 0.0;
  for (int i = 0; i < r.size(); ++i) {
    const double t = alpha * r[i];
    target += t * t;
    const double d = e[i] - t;
    residual += d * d;
  }
  return 10.0 * std::log10(target / residual);
}

}  // namespace

TEST_CASE("identity and scaled identity hit the cap") {
  const Eigen::VectorXd r = random_vec(256, 1);
  CHECK(si_sdr(r, r) == 100.0);
  CHECK(si_sdr(r, 2.0 * r) == 100.0);
}

TEST_CASE("closed-form case: [1,0] vs [1,1] gives 0 dB") {
  Eigen::VectorXd r(2), e(2);
  r << 1, 0;
  e << 1, 1;
  CHECK(si_sdr(r, e) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("matches brute-force projection formula") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::VectorXd r = random_vec(512, 100 + seed);
    Eigen::VectorXd e = r + 0.3 * random_vec(512, 200 + seed);
    CHECK(std::abs(si_sdr(r, e) - si_sdr_bruteforce(r, e)) < 1e-10);
  }
}

TEST_CASE("scale invariance of the estimate") {
  const Eigen::VectorXd r = random_vec(300, 5);
  const Eigen::VectorXd e = r + 0.5 * random_vec(300, 6);
  const double base = si_sdr(r, e);
  for (double c : {0.01, 0.5, 3.0, -2.0, 1e6}) {
    CHECK(std::abs(si_sdr(r, c * e) - base) < 1e-10);
  }
}

TEST_CASE("joint permutation leaves si_sdr unchanged") {
  const Eigen::VectorXd r = random_vec(64, 9);
  const Eigen::VectorXd e = r + 0.2 * random_vec(64, 10);
  Eigen::VectorXd rp = r.reverse();
  Eigen::VectorXd ep = e.reverse();
  CHECK(si_sdr(rp, ep) == doctest::Approx(si_sdr(r, e)).epsilon(1e-12));
}

TEST_CASE("zero reference is an error") {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(16);
  CHECK_THROWS_AS(si_sdr(r, random_vec(16, 2)), DataError);
}

TEST_CASE("aggregate of identical values has zero half-width") {
  std::vector<SceneMetric> rows(5, SceneMetric{"s", "partial", 96, 1.0, 4.0});
  const MetricReport rep = aggregate(rows);
  CHECK(rep.n == 5);
  CHECK(rep.mean_delta == doctest::Approx(3.0));
  CHECK(rep.ci95_delta == doctest::Approx(0.0));
}

TEST_CASE("aggregate closed form for two values {0, 2}") {
  std::vector<SceneMetric> rows{{"a", "partial", 96, 0.0, 0.0},
                                {"b", "partial", 96, 0.0, 2.0}};
  const MetricReport rep = aggregate(rows);
  CHECK(rep.mean_delta == doctest::Approx(1.0));
  CHECK(rep.ci95_delta == doctest::Approx(1.96 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("aggregate matches independent statistics on simulated values") {
  Rng rng = make_rng(77);
  std::normal_distribution<double> dist(2.0, 1.5);
  std::vector<SceneMetric> rows;
  for (int i = 0; i < 100; ++i)
    rows.push_back({"s" + std::to_string(i), "fixed", 64, 0.0, dist(rng)});
  const MetricReport rep = aggregate(rows);
  double mean = 0.0;
  for (const auto& r : rows) mean += r.delta();
  mean /= 100.0;
  double var = 0.0;
  for (const auto& r : rows) var += (r.delta() - mean) * (r.delta() - mean);
  var /= 100.0;
  CHECK(std::abs(rep.mean_delta - mean) < 1e-12);
  CHECK(std::abs(rep.ci95_delta - 1.96 * std::sqrt(var) / 10.0) < 1e-12);
}

TEST_CASE("aggregate needs two scenes") {
  std::vector<SceneMetric> rows{{"a", "fixed", 64, 0.0, 1.0}};
  CHECK_THROWS_AS(aggregate(rows), DataError);
}
