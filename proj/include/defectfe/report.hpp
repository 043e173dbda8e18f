#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace defectfe {

/// One CSV row: N, estimator, value, stderr, abs_err, ginf.
struct ConvergenceRow {
  std::size_t N = 0;  // 0 marks the limit row
  std::string estimator;
  double value = 0.0;
  double std_error = 0.0;
  double abs_err = 0.0;
  double ginf = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // sum of squared residuals in log space
  std::size_t used = 0;
  std::size_t excluded = 0;
};

/// Least squares of log(abs_err) on log(N).  Rows whose error is not above
/// 10 x their standard error (or not positive) are excluded; at least three
/// must remain.
SlopeFit fit_slope(const std::vector<ConvergenceRow>& rows);

inline const char* csv_header() { return "N,estimator,value,stderr,abs_err,ginf"; }

/// Header plus rows, floating values at 17 significant digits.
void write_rows(std::ostream& out, const std::vector<ConvergenceRow>& rows);

std::string format_double(double v);

}  // namespace defectfe
