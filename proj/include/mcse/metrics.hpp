// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mcse {

// Scale-invariant SDR in dB between a mono reference and estimate.
// The estimate is projected onto the reference (alpha = <e,r>/||r||^2) and
// the ratio ||alpha r||^2 / ||e - alpha r||^2 is reported in dB, capped to
// +/-100 dB at the numerically-degenerate ends.
double si_sdr(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate);

struct SceneMetric {
  std::string scene_id;
  std::string scheme;
  int dict_size = 0;
  double si_sdr_in = 0.0;   // mixture vs clean reference
  double si_sdr_out = 0.0;  // enhanced vs clean reference
  double delta() const { return si_sdr_out - si_sdr_in; }
};

struct MetricReport {
  std::string scheme;
  int dict_size = 0;
  int n = 0;
  double mean_in = 0.0;
  double mean_out = 0.0;
  double mean_delta = 0.0;
  // Normal-approximation 95% half-width of the delta, 1.96 * sd / sqrt(n).
  double ci95_delta = 0.0;
};

// Aggregates per-scene rows that share (scheme, dict_size). Requires n >= 2.
MetricReport aggregate(const std::vector<SceneMetric>& rows);

// Plain-text metrics table: per-scene rows plus aggregate rows, stable
// formatting so identical inputs produce byte-identical files.
void write_metrics_table(const std::string& path,
                         const std::vector<SceneMetric>& rows,
                         const std::vector<MetricReport>& reports);

}  // namespace mcse
