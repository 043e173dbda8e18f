#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "defectfe/potentials.hpp"
#include "defectfe/quadrature.hpp"
#include "defectfe/report.hpp"
#include "defectfe/sampler.hpp"

namespace defectfe {

enum class Selector { gn_sample, gn_dense, gncg, ginf, convergence, check, cb_table };

Selector parse_selector(const std::string& name);
std::string to_string(Selector s);

/// Parsed run configuration.  The file format is JSON; see configs/ and the
/// README for the schema.
struct RunConfig {
  Selector selector = Selector::convergence;
  PotentialSpec potential{"harmonic", {1.0}};
  PotentialSpec defect{"none", {}};
  ForceSpec forces;
  std::vector<double> force_exponents;  // more than one: a sweep over p
  double A = 1.0;
  std::vector<std::size_t> N;
  double beta = 1.0;
  std::vector<std::string> estimators{"gncg"};
  MalaConfig sampler;
  QuadratureConfig quadrature;
  double transfer_spacing = 0.04;
  std::string output;
  std::uint64_t seed = 1;
  Interval cb_range{0.0, 0.0};
  int cb_nodes = 65;
  std::optional<Interval> check_window;
  std::size_t check_grid = 1000;

  void validate() const;
};

/// Parses JSON text.  With `desk` set, the object under "desk" is merged into
/// the root first (reduced-scale runs).
RunConfig parse_config(const std::string& text, bool desk = false);
RunConfig load_config(const std::string& path, bool desk = false);

struct RunResult {
  std::vector<ConvergenceRow> rows;
  std::string csv;      // full file body, comment lines included
  std::string summary;  // one line for the terminal
};

/// Runs the selected computation; `workers` bounds the thread pool width.
RunResult run(const RunConfig& cfg, unsigned workers);

}  // namespace defectfe
