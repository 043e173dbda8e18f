#include "defectfe/report.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "defectfe/errors.hpp"

namespace defectfe {

SlopeFit fit_slope(const std::vector<ConvergenceRow>& rows) {
  SlopeFit fit;
  std::vector<double> x, y;
  for (const ConvergenceRow& r : rows) {
    if (r.N == 0) continue;
    if (!(r.abs_err > 0.0) || !(r.abs_err >= 10.0 * r.std_error) || !std::isfinite(r.abs_err)) {
      ++fit.excluded;
      continue;
    }
    x.push_back(std::log(static_cast<double>(r.N)));
    y.push_back(std::log(r.abs_err));
  }
  fit.used = x.size();
  if (fit.used < 3) {
    throw InvalidInput("slope fit needs at least 3 rows with resolvable error (have " + std::to_string(fit.used) + ")");
  }
  const auto n = static_cast<double>(fit.used);
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (!(sxx > 0.0)) throw InvalidInput("slope fit needs at least two distinct N");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = y[k] - (fit.intercept + fit.slope * x[k]);
    fit.residual += e * e;
  }
  return fit;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_rows(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  out << csv_header() << '\n';
  for (const ConvergenceRow& r : rows) {
    out << (r.N == 0 ? std::string("inf") : std::to_string(r.N)) << ',' << r.estimator << ','
        << format_double(r.value) << ',' << format_double(r.std_error) << ',' << format_double(r.abs_err) << ','
        << format_double(r.ginf) << '\n';
  }
}

}  // namespace defectfe
