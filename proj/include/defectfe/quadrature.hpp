#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <limits>
#include <queue>
#include <string>
#include <type_traits>
#include <vector>

#include "defectfe/errors.hpp"
#include "defectfe/potentials.hpp"

namespace defectfe {

struct QuadratureConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  /// Half-width of the integration window in units of 1/sqrt(curvature).
  double truncation = 12.0;
  int max_subdivisions = 4000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw InvalidInput("quadrature tolerances must be positive");
    if (!(truncation >= 4.0)) throw InvalidInput("quadrature truncation multiplier must be at least 4");
    if (max_subdivisions < 1) throw InvalidInput("quadrature needs at least one subdivision");
  }
};

template <typename Value>
struct QuadratureResult {
  Value value;
  Value error;
  int evaluations = 0;
  int intervals = 0;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <typename Value>
Value abs_of(const Value& v) {
  if constexpr (std::is_arithmetic_v<Value>) {
    return std::abs(v);
  } else {
    return v.abs();
  }
}

template <typename Value>
double max_of(const Value& v) {
  if constexpr (std::is_arithmetic_v<Value>) {
    return v;
  } else {
    return v.maxCoeff();
  }
}

template <typename Value>
struct Segment {
  double a = 0.0, b = 0.0;
  Value value;
  Value error;
  double priority = 0.0;  // largest error relative to its own tolerance share
};

// One Gauss-Kronrod panel with the QUADPACK error heuristic.
template <typename Value, typename F>
Segment<Value> gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const Value fc = f(center);
  Value kron = fc * kKronrodWeights[7];
  Value gauss = fc * kGaussWeights[3];
  std::array<Value, 7> f1, f2;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    f1[j] = f(center - dx);
    f2[j] = f(center + dx);
    kron += (f1[j] + f2[j]) * kKronrodWeights[j];
    if (j % 2 == 1) gauss += (f1[j] + f2[j]) * kGaussWeights[j / 2];
  }
  const Value mean = kron * 0.5;
  Value asc = abs_of<Value>(fc - mean) * kKronrodWeights[7];
  for (int j = 0; j < 7; ++j) {
    asc += (abs_of<Value>(f1[j] - mean) + abs_of<Value>(f2[j] - mean)) * kKronrodWeights[j];
  }
  Segment<Value> s;
  s.a = a;
  s.b = b;
  s.value = kron * half;
  const Value diff = abs_of<Value>((kron - gauss) * half);
  asc = asc * std::abs(half);
  if constexpr (std::is_arithmetic_v<Value>) {
    double e = diff;
    if (asc != 0.0 && e != 0.0) e = asc * std::min(1.0, std::pow(200.0 * e / asc, 1.5));
    s.error = std::max(e, 50.0 * std::numeric_limits<double>::epsilon() * std::abs(s.value));
  } else {
    s.error = diff;
    for (Eigen::Index k = 0; k < diff.size(); ++k) {
      double e = diff[k];
      if (asc[k] != 0.0 && e != 0.0) e = asc[k] * std::min(1.0, std::pow(200.0 * e / asc[k], 1.5));
      s.error[k] = std::max(e, 50.0 * std::numeric_limits<double>::epsilon() * std::abs(s.value[k]));
    }
  }
  return s;
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration of a scalar or Eigen-array
/// valued integrand on [a, b].  Every component must meet
/// max(abs_tol, rel_tol * |value|).
template <typename Value, typename F>
QuadratureResult<Value> integrate_adaptive(F&& f, double a, double b, const QuadratureConfig& cfg,
                                           int initial_panels = 8) {
  using Seg = detail::Segment<Value>;
  auto counting = [&](double x) -> Value { return f(x); };
  std::vector<Seg> segs;
  segs.reserve(static_cast<std::size_t>(initial_panels) * 4);
  const double w = (b - a) / initial_panels;
  for (int k = 0; k < initial_panels; ++k) {
    const double lo = a + w * k;
    const double hi = (k + 1 == initial_panels) ? b : a + w * (k + 1);
    segs.push_back(detail::gk15<Value>(counting, lo, hi));
  }
  int evaluations = 15 * initial_panels;

  auto totals = [&](Value& value, Value& error) {
    value = segs.front().value;
    error = segs.front().error;
    for (std::size_t k = 1; k < segs.size(); ++k) {
      value += segs[k].value;
      error += segs[k].error;
    }
  };
  auto satisfied = [&](const Value& value, const Value& error) {
    if constexpr (std::is_arithmetic_v<Value>) {
      return error <= std::max(cfg.abs_tol, cfg.rel_tol * std::abs(value));
    } else {
      return ((error - (cfg.rel_tol * value.abs()).max(cfg.abs_tol)) <= 0.0).all();
    }
  };
  auto weight = [&](const Value& value, const Value& err) {
    if constexpr (std::is_arithmetic_v<Value>) {
      return err / std::max(cfg.abs_tol, cfg.rel_tol * std::abs(value));
    } else {
      return (err / (cfg.rel_tol * value.abs()).max(cfg.abs_tol)).maxCoeff();
    }
  };

  Value value, error;
  totals(value, error);
  while (!satisfied(value, error)) {
    if (static_cast<int>(segs.size()) >= cfg.max_subdivisions) {
      throw NumericalFailure("adaptive quadrature hit the subdivision limit (" + std::to_string(cfg.max_subdivisions) +
                             ") before reaching tolerance; error estimate " +
                             std::to_string(detail::max_of<Value>(error)));
    }
    // Split the panel carrying the most error relative to the tolerance.
    std::size_t worst = 0;
    double worst_w = -1.0;
    for (std::size_t k = 0; k < segs.size(); ++k) {
      const double wk = weight(value, segs[k].error);
      if (wk > worst_w) {
        worst_w = wk;
        worst = k;
      }
    }
    const Seg s = segs[worst];
    const double mid = 0.5 * (s.a + s.b);
    if (!(mid > s.a && mid < s.b)) {
      throw NumericalFailure("adaptive quadrature reached floating-point resolution without converging");
    }
    segs[worst] = detail::gk15<Value>(counting, s.a, mid);
    segs.push_back(detail::gk15<Value>(counting, mid, s.b));
    evaluations += 30;
    totals(value, error);
  }
  return {value, error, evaluations, static_cast<int>(segs.size())};
}

// ---------------------------------------------------------------------------
// Log-space integrals of exp(g)

/// Exponent callables return either a plain double or a Jet (value with first
/// and second derivative); Jets let the peak search use Newton steps.
template <typename G>
concept JetExponent = std::same_as<std::invoke_result_t<G&, double>, Jet>;

namespace detail {

template <typename G>
double exponent_value(G& g, double y) {
  if constexpr (JetExponent<G>) {
    return g(y).value;
  } else {
    return static_cast<double>(g(y));
  }
}

// Brent's parabolic/golden minimisation of h on [a, c] with b an interior point
// where h(b) <= h(a), h(c).
template <typename H>
double brent_minimize(H& h, double a, double b, double c, double fb, double xtol) {
  constexpr double kGold = 0.3819660112501051;
  double x = b, w = b, v = b, fx = fb, fw = fb, fv = fb;
  double d = 0.0, e = 0.0;
  double lo = std::min(a, c), hi = std::max(a, c);
  for (int iter = 0; iter < 200; ++iter) {
    const double m = 0.5 * (lo + hi);
    const double tol1 = xtol * (1.0 + std::abs(x));
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (hi - lo)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (lo - x) && p < q * (hi - x)) {
        d = p / q;
        const double u = x + d;
        if (u - lo < tol2 || hi - u < tol2) d = (m >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= m) ? lo - x : hi - x;
      d = kGold * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = h(u);
    if (fu <= fx) {
      if (u >= x) lo = x; else hi = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) lo = u; else hi = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return x;
}

}  // namespace detail

/// Location and height of the peak of exp(g) and the truncated window used
/// for integration.
struct LogWindow {
  double center = 0.0;
  double peak = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Locates a local maximiser of g starting from center_hint and widens the
/// window [y* - m s, y* + m s], s = 1/sqrt(curvature_bound), until g has
/// dropped by at least m^2/2 at both ends.
template <typename G>
LogWindow find_log_window(G&& g, double curvature_bound, double center_hint, const QuadratureConfig& cfg) {
  if (!(curvature_bound > 0.0) || !std::isfinite(curvature_bound)) {
    throw InvalidInput("log-space quadrature needs a positive curvature bound");
  }
  if (!std::isfinite(center_hint)) throw InvalidInput("log-space quadrature needs a finite center hint");
  const double scale = 1.0 / std::sqrt(curvature_bound);
  double y = center_hint;

  if constexpr (JetExponent<G>) {
    // Damped Newton on g' = 0; g'' < 0 near a maximiser.
    Jet j = g(y);
    for (int it = 0; it < 200; ++it) {
      if (!std::isfinite(j.value)) break;
      double step = (j.d2 < 0.0) ? -j.d1 / j.d2 : (j.d1 > 0 ? scale : -scale);
      step = std::clamp(step, -4.0 * scale, 4.0 * scale);
      double yn = y + step;
      Jet jn = g(yn);
      int halvings = 0;
      while ((!std::isfinite(jn.value) || jn.value < j.value) && halvings < 60) {
        step *= 0.5;
        yn = y + step;
        jn = g(yn);
        ++halvings;
      }
      if (halvings == 60) break;
      y = yn;
      j = jn;
      if (std::abs(step) <= 1e-13 * (scale + std::abs(y))) break;
    }
    if (!std::isfinite(j.value)) throw NumericalFailure("peak search produced a non-finite exponent");
  } else {
    auto neg = [&](double x) {
      const double v = detail::exponent_value(g, x);
      return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    double fb = neg(y);
    if (!std::isfinite(fb)) throw NumericalFailure("exponent is not finite at the center hint");
    double step = scale;
    double fr = neg(y + step);
    if (fr < fb) {
      // peak lies to the right
    } else {
      const double fl = neg(y - step);
      if (fl < fb) {
        step = -step;
        fr = fl;
      } else {
        // already bracketed: [y - s, y + s]
        const double x = detail::brent_minimize(neg, y - scale, y, y + scale, fb, 1e-10);
        y = x;
        step = 0.0;
      }
    }
    if (step != 0.0) {
      double a = y, b = y + step, fa = fb, fbb = fr;
      double c = b + step, fc = neg(c);
      int expansions = 0;
      while (fc < fbb) {
        if (++expansions > 200) throw NumericalFailure("peak search diverged while bracketing the maximiser");
        step *= 1.6;
        a = b;
        fa = fbb;
        b = c;
        fbb = fc;
        c = b + step;
        fc = neg(c);
      }
      (void)fa;
      y = detail::brent_minimize(neg, a, b, c, fbb, 1e-10);
    }
  }

  LogWindow w;
  w.center = y;
  w.peak = detail::exponent_value(g, y);
  if (!std::isfinite(w.peak)) throw NumericalFailure("exponent is not finite at its maximiser");
  const double reach = cfg.truncation * scale;
  const double drop = 0.5 * cfg.truncation * cfg.truncation;
  auto extend = [&](double dir) {
    double x = y + dir * reach;
    for (int k = 0; k < 64; ++k) {
      const double v = detail::exponent_value(g, x);
      if (!std::isfinite(v) || v - w.peak <= -drop) return x;
      x += dir * reach;
    }
    throw NumericalFailure("integrand does not decay within 64 truncation widths of its peak");
  };
  w.lo = extend(-1.0);
  w.hi = extend(+1.0);
  return w;
}

/// log of the integral of exp(g) over the real line, computed as
/// g(y*) + log of the integral of exp(g - g(y*)) over a truncated window.
template <typename G>
double log_integral_exp(G&& g, double curvature_bound, double center_hint, const QuadratureConfig& cfg = {}) {
  const LogWindow w = find_log_window(g, curvature_bound, center_hint, cfg);
  auto shifted = [&](double y) {
    const double v = detail::exponent_value(g, y) - w.peak;
    return std::isfinite(v) ? std::exp(v) : 0.0;
  };
  const auto r = integrate_adaptive<double>(shifted, w.lo, w.hi, cfg);
  if (!(r.value > 0.0)) throw NumericalFailure("log-space integral has no mass");
  return w.peak + std::log(r.value);
}

/// Normalised expectation of f under the density proportional to exp(g).
template <typename G, typename F>
double weighted_mean(G&& g, F&& f, double curvature_bound, double center_hint, const QuadratureConfig& cfg = {}) {
  const LogWindow w = find_log_window(g, curvature_bound, center_hint, cfg);
  auto both = [&](double y) {
    const double v = detail::exponent_value(g, y) - w.peak;
    const double e = std::isfinite(v) ? std::exp(v) : 0.0;
    Eigen::Array2d out;
    out << e, (e == 0.0 ? 0.0 : e * static_cast<double>(f(y)));
    return out;
  };
  const auto r = integrate_adaptive<Eigen::Array2d>(both, w.lo, w.hi, cfg);
  if (!(r.value[0] > 0.0)) throw NumericalFailure("weighted mean over a measure with no mass");
  return r.value[1] / r.value[0];
}

/// Log-mass, mean and variance of the density proportional to exp(g).
struct Moments {
  double log_mass = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

template <typename G>
Moments log_moments(G&& g, double curvature_bound, double center_hint, const QuadratureConfig& cfg = {}) {
  const LogWindow w = find_log_window(g, curvature_bound, center_hint, cfg);
  const double c = w.center;
  auto integrand = [&](double y) {
    const double v = detail::exponent_value(g, y) - w.peak;
    const double e = std::isfinite(v) ? std::exp(v) : 0.0;
    const double d = y - c;
    Eigen::Array3d out;
    out << e, e * d, e * d * d;
    return out;
  };
  const auto r = integrate_adaptive<Eigen::Array3d>(integrand, w.lo, w.hi, cfg);
  if (!(r.value[0] > 0.0)) throw NumericalFailure("moments of a measure with no mass");
  Moments m;
  m.log_mass = w.peak + std::log(r.value[0]);
  const double m1 = r.value[1] / r.value[0];
  m.mean = c + m1;
  m.variance = r.value[2] / r.value[0] - m1 * m1;
  return m;
}

}  // namespace defectfe
