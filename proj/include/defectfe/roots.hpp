#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "defectfe/errors.hpp"

namespace defectfe {

/// Residual and slope of an increasing scalar function.
struct Sloped {
  double value = 0.0;
  double slope = 0.0;
};

struct RootResult {
  double x = 0.0;
  double residual = 0.0;
  int iterations = 0;
  int bisections = 0;
};

struct MonotoneSolveOptions {
  /// Certified bounds on f' (0 < min_slope <= max_slope, max_slope may be inf).
  double min_slope = 0.0;
  double max_slope = std::numeric_limits<double>::infinity();
  /// Stop once |f(x)| <= tol.
  double tol = 1e-12;
  /// Stop when the bracket shrinks below x_tol * (1 + |x|).
  double x_tol = 4.0 * std::numeric_limits<double>::epsilon();
  int max_iterations = 200;
  int max_bracket_doublings = 80;
};

/// Root of a strictly increasing f by Newton's method safeguarded with
/// bisection.  The initial bracket follows from the slope bounds around the
/// starting point and is grown geometrically if the bounds turn out not to
/// hold (signalling that the assumed curvature window was exceeded).
template <typename F>
RootResult solve_increasing(F&& f, double x0, const MonotoneSolveOptions& opt) {
  if (!(opt.min_slope > 0.0)) throw InvalidInput("monotone solve needs a positive lower slope bound");
  RootResult out;
  Sloped s = f(x0);
  if (!std::isfinite(s.value)) throw NumericalFailure("monotone solve: residual not finite at the starting point");
  out.x = x0;
  out.residual = s.value;
  if (std::abs(s.value) <= opt.tol) return out;

  // Root lies between x0 - r/min_slope and x0 - r/max_slope.
  const double r = s.value;
  double near = x0 - r / (std::isfinite(opt.max_slope) ? opt.max_slope : 1e300);
  double far = x0 - r / opt.min_slope;
  double lo, hi, flo, fhi;
  if (r > 0.0) {
    hi = x0;
    fhi = r;
    lo = std::min(near, far);
    double span = x0 - lo;
    if (!(span > 0.0)) span = 1.0;
    flo = f(lo).value;
    int grow = 0;
    while (!(flo <= 0.0)) {
      if (++grow > opt.max_bracket_doublings) {
        throw NumericalFailure("monotone solve: bracket growth exceeded its bound (slope assumption violated?)");
      }
      hi = lo;
      fhi = flo;
      span *= 2.0;
      lo = x0 - span;
      flo = f(lo).value;
    }
  } else {
    lo = x0;
    flo = r;
    hi = std::max(near, far);
    double span = hi - x0;
    if (!(span > 0.0)) span = 1.0;
    fhi = f(hi).value;
    int grow = 0;
    while (!(fhi >= 0.0)) {
      if (++grow > opt.max_bracket_doublings) {
        throw NumericalFailure("monotone solve: bracket growth exceeded its bound (slope assumption violated?)");
      }
      lo = hi;
      flo = fhi;
      span *= 2.0;
      hi = x0 + span;
      fhi = f(hi).value;
    }
  }
  if (flo == 0.0) return {lo, 0.0, 0, 0};
  if (fhi == 0.0) return {hi, 0.0, 0, 0};

  // Start Newton from whichever evaluated point has the smaller residual.
  double x = x0;
  if (std::abs(flo) < std::abs(s.value)) {
    x = lo;
    s = f(x);
  }
  if (std::abs(fhi) < std::abs(s.value)) {
    x = hi;
    s = f(x);
  }
  for (int it = 0; it < opt.max_iterations; ++it) {
    out.iterations = it + 1;
    if (std::abs(s.value) <= opt.tol) break;
    if (s.value < 0.0) lo = std::max(lo, x); else hi = std::min(hi, x);
    if (hi - lo <= opt.x_tol * (1.0 + std::abs(x))) break;
    double next = (s.slope > 0.0 && std::isfinite(s.slope)) ? x - s.value / s.slope : lo - 1.0;
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
      ++out.bisections;
    }
    const Sloped sn = f(next);
    if (!std::isfinite(sn.value)) throw NumericalFailure("monotone solve: residual became non-finite");
    // A Newton step that fails to shrink the residual is replaced by bisection.
    if (std::abs(sn.value) > 0.5 * std::abs(s.value) && next != 0.5 * (lo + hi)) {
      if (sn.value < 0.0) lo = std::max(lo, next); else hi = std::min(hi, next);
      const double mid = 0.5 * (lo + hi);
      const Sloped sm = f(mid);
      ++out.bisections;
      if (std::abs(sm.value) < std::abs(sn.value)) {
        x = mid;
        s = sm;
        continue;
      }
    }
    x = next;
    s = sn;
  }
  out.x = x;
  out.residual = s.value;
  return out;
}

}  // namespace defectfe
