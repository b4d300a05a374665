#pragma once

#include <string>
#include <vector>

namespace gradflow {

/// One row of a run's diagnostics stream.
struct DiagnosticsRecord {
  long step = 0;
  double t = 0.0;
  double e_original = 0.0;
  /// R - C for R-based schemes, eps2/2 (A phi, phi) + q^2 - C for baseline SAV.
  double e_modified = 0.0;
  double aux = 0.0;
  double xi = 1.0;
  double xi_error = 0.0;
  /// (phi, 1)
  double mass = 0.0;
  double dissipation = 0.0;
  unsigned flags = 0;
};

struct ConvergenceRow {
  double dt = 0.0;
  double error = 0.0;
  /// log2(e_{i-1} / e_i); NaN on the first row.
  double rate = 0.0;
};

using ConvergenceTable = std::vector<ConvergenceRow>;

/// errors[i][j]: error at dts[i] for approach names[j].
struct ComparisonTable {
  std::vector<double> dts;
  std::vector<std::string> names;
  std::vector<std::vector<double>> errors;
};

}  // namespace gradflow
