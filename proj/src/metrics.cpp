// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/metrics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

#include "mcse/common.hpp"

namespace mcse {

double si_sdr(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate) {
  if (reference.size() != estimate.size())
    throw DataError("si_sdr: length mismatch");
  if (reference.size() == 0) throw DataError("si_sdr: empty signals");
  const double ref_energy = reference.squaredNorm();
  if (ref_energy <= 0.0) throw DataError("si_sdr: zero reference");

  const double alpha = reference.dot(estimate) / ref_energy;
  const double target = alpha * alpha * ref_energy;
  const double residual = (estimate - alpha * reference).squaredNorm();
  if (target <= 0.0) return -100.0;
  if (residual <= 1e-30 * target) return 100.0;
  return std::min(100.0, std::max(-100.0, 10.0 * std::log10(target / residual)));
}

MetricReport aggregate(const std::vector<SceneMetric>& rows) {
  if (rows.size() < 2) throw DataError("aggregate: need at least 2 scenes");
  MetricReport rep;
  rep.scheme = rows[0].scheme;
  rep.dict_size = rows[0].dict_size;
  rep.n = static_cast<int>(rows.size());
  for (const auto& r : rows) {
    if (r.scheme != rep.scheme || r.dict_size != rep.dict_size)
      throw DataError("aggregate: mixed scheme/dict_size rows");
    rep.mean_in += r.si_sdr_in;
    rep.mean_out += r.si_sdr_out;
    rep.mean_delta += r.delta();
  }
  rep.mean_in /= rep.n;
  rep.mean_out /= rep.n;
  rep.mean_delta /= rep.n;
  double var = 0.0;
  for (const auto& r : rows) {
    const double d = r.delta() - rep.mean_delta;
    var += d * d;
  }
  var /= rep.n;  // population variance, matching 1.96*sd/sqrt(n)
  rep.ci95_delta = 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(rep.n));
  return rep;
}

void write_metrics_table(const std::string& path,
                         const std::vector<SceneMetric>& rows,
                         const std::vector<MetricReport>& reports) {
  std::ofstream os(path);
  if (!os) throw DataError("write_metrics_table: cannot open '" + path + "'");
  os << "# mcse metrics v1\n";
  os << "# scene\tscheme\tK\tsi_sdr_in\tsi_sdr_out\tdelta\n";
  for (const auto& r : rows) {
    os << fmt::format("{}\t{}\t{}\t{:.6f}\t{:.6f}\t{:.6f}\n", r.scene_id, r.scheme,
                      r.dict_size, r.si_sdr_in, r.si_sdr_out, r.delta());
  }
  os << "# aggregate\tscheme\tK\tn\tmean_in\tmean_out\tmean_delta\tci95_delta\n";
  for (const auto& a : reports) {
    os << fmt::format("aggregate\t{}\t{}\t{}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\n",
                      a.scheme, a.dict_size, a.n, a.mean_in, a.mean_out,
                      a.mean_delta, a.ci95_delta);
  }
  if (!os) throw DataError("write_metrics_table: short write to '" + path + "'");
}

}  // namespace mcse
