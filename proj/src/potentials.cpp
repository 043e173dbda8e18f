#include "defectfe/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "defectfe/errors.hpp"

namespace defectfe {

std::string to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::harmonic:
      return "harmonic";
    case PotentialKind::quartic_paper:
      return "quartic-paper";
    case PotentialKind::polynomial:
      return "polynomial";
  }
  return "unknown";
}

Potential Potential::harmonic(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidInput("harmonic stiffness must be positive and finite, got " + std::to_string(alpha));
  }
  Potential p;
  p.kind_ = PotentialKind::harmonic;
  p.alpha_ = alpha;
  p.coeffs_ = {0.0, 0.0, alpha};
  return p;
}

Potential Potential::quartic_paper() {
  Potential p;
  p.kind_ = PotentialKind::quartic_paper;
  // (y-1)^4/2 + y^2/2 expanded
  p.coeffs_ = {0.5, -2.0, 3.5, -2.0, 0.5};
  return p;
}

Potential Potential::polynomial(std::vector<double> coefficients) {
  for (double c : coefficients) {
    if (!std::isfinite(c)) throw InvalidInput("polynomial coefficients must be finite");
  }
  while (!coefficients.empty() && coefficients.back() == 0.0) coefficients.pop_back();
  Potential p;
  p.kind_ = PotentialKind::polynomial;
  p.coeffs_ = std::move(coefficients);
  return p;
}

bool Potential::is_zero() const { return coeffs_.empty() || std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return c == 0.0; }); }

double Potential::stiffness() const {
  if (kind_ != PotentialKind::harmonic) throw InvalidInput("stiffness() is defined for harmonic potentials only");
  return alpha_;
}

Jet Potential::eval(double y) const {
  switch (kind_) {
    case PotentialKind::harmonic:
      return {alpha_ * y * y, 2.0 * alpha_ * y, 2.0 * alpha_};
    case PotentialKind::quartic_paper: {
      const double r = y - 1.0;
      const double r2 = r * r;
      return {0.5 * r2 * r2 + 0.5 * y * y, 2.0 * r2 * r + y, 6.0 * r2 + 1.0};
    }
    case PotentialKind::polynomial:
      break;
  }
  // Horner for value and both derivatives at once.
  Jet j;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
    j.d2 = j.d2 * y + 2.0 * j.d1;
    j.d1 = j.d1 * y + j.value;
    j.value = j.value * y + *it;
  }
  return j;
}

namespace {

std::vector<double> derivative(std::span<const double> c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
  return d;
}

double horner(std::span<const double> c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

std::vector<double> add(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) out[k] += a[k];
  for (std::size_t k = 0; k < b.size(); ++k) out[k] += b[k];
  return out;
}

// Extremes of the polynomial `second` on the window: endpoints plus roots of
// its derivative `third`, located on a grid and refined by bisection.
Interval polynomial_range(std::span<const double> second, std::span<const double> third, Interval window,
                          std::size_t grid_points) {
  Interval r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  auto consider = [&](double x) {
    const double v = horner(second, x);
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
  };
  consider(window.lo);
  consider(window.hi);
  const std::size_t n = std::max<std::size_t>(grid_points, 2);
  const double step = window.width() / static_cast<double>(n - 1);
  double x_prev = window.lo;
  double f_prev = horner(third, x_prev);
  for (std::size_t k = 1; k < n; ++k) {
    const double x = (k + 1 == n) ? window.hi : window.lo + step * static_cast<double>(k);
    const double f = horner(third, x);
    consider(x);
    if (f == 0.0) {
      consider(x);
    } else if ((f_prev < 0.0) != (f < 0.0) && f_prev != 0.0) {
      double a = x_prev, b = x, fa = f_prev;
      for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
        const double m = 0.5 * (a + b);
        const double fm = horner(third, m);
        if ((fm < 0.0) == (fa < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      consider(0.5 * (a + b));
    }
    x_prev = x;
    f_prev = f;
  }
  return r;
}

void require_window(Interval window) {
  if (!std::isfinite(window.lo) || !std::isfinite(window.hi)) throw InvalidInput("curvature window must be finite");
  if (!(window.hi > window.lo)) throw InvalidInput("curvature window is empty");
}

}  // namespace

Interval Potential::curvature_range(Interval window) const {
  require_window(window);
  if (kind_ == PotentialKind::harmonic) return {2.0 * alpha_, 2.0 * alpha_};
  const auto d1 = derivative(coeffs_);
  const auto d2 = derivative(d1);
  const auto d3 = derivative(d2);
  if (d2.empty()) return {0.0, 0.0};
  return polynomial_range(d2, d3, window, 1025);
}

Potential make_potential(const PotentialSpec& spec) {
  const auto& p = spec.parameters;
  if (spec.kind == "harmonic") {
    if (p.size() != 1) throw InvalidInput("harmonic potential takes exactly one parameter (alpha)");
    return Potential::harmonic(p[0]);
  }
  if (spec.kind == "quartic-paper") {
    if (!p.empty()) throw InvalidInput("quartic-paper potential takes no parameters");
    return Potential::quartic_paper();
  }
  if (spec.kind == "polynomial") return Potential::polynomial(p);
  if (spec.kind == "none" || spec.kind == "zero") return Potential::zero();
  throw InvalidInput("unknown potential kind '" + spec.kind + "'");
}

AssumptionReport check_assumptions(const Potential& psi, const DefectSpec& defect, Interval window,
                                   std::size_t grid_points) {
  require_window(window);
  if (grid_points < 2) throw InvalidInput("check_assumptions needs at least two grid points");

  AssumptionReport rep;
  rep.window = window;
  rep.grid_points = grid_points;

  auto second_and_third = [](std::span<const double> c) {
    auto d2 = derivative(derivative(c));
    auto d3 = derivative(d2);
    return std::pair{d2, d3};
  };
  if (psi.kind() == PotentialKind::harmonic && defect.potential.kind() == PotentialKind::harmonic) {
    rep.kappa1 = rep.kappa2 = 2.0 * psi.stiffness();
    rep.varsigma1 = rep.varsigma2 = rep.kappa1 + 2.0 * defect.potential.stiffness();
  } else {
    auto [s2, s3] = second_and_third(psi.coefficients());
    const Interval k = s2.empty() ? Interval{0.0, 0.0} : polynomial_range(s2, s3, window, grid_points);
    const auto sum = add(psi.coefficients(), defect.potential.coefficients());
    auto [t2, t3] = second_and_third(sum);
    const Interval v = t2.empty() ? Interval{0.0, 0.0} : polynomial_range(t2, t3, window, grid_points);
    rep.kappa1 = k.lo;
    rep.kappa2 = k.hi;
    rep.varsigma1 = v.lo;
    rep.varsigma2 = v.hi;
  }
  rep.pass = rep.kappa1 > 0.0 && rep.varsigma1 > 0.0;
  return rep;
}

double curvature_floor(const Potential& psi, const DefectSpec& defect, Interval window) {
  const auto rep = check_assumptions(psi, defect, window, 1025);
  return rep.varsigma1;
}

// ---------------------------------------------------------------------------

double power_tail(std::size_t i, double p) {
  if (!(p > 1.0)) throw InvalidInput("power tail needs p > 1");
  if (i == 0) throw InvalidInput("power tail index starts at 1");
  // Direct summation up to M, then Euler-Maclaurin for sum_{j>=M} j^-p.
  constexpr std::size_t kMin = 32;
  const std::size_t m = std::max(i, kMin);
  double direct = 0.0;
  for (std::size_t j = m - 1; j >= i && j < m; --j) direct += std::pow(static_cast<double>(j), -p);
  const double x = static_cast<double>(m);
  const double f = std::pow(x, -p);
  const double p1 = p, p2 = p + 1.0, p3 = p + 2.0, p4 = p + 3.0, p5 = p + 4.0;
  const double em = x * f / (p - 1.0) + 0.5 * f + p1 * f / x / 12.0 - p1 * p2 * p3 * f / (x * x * x) / 720.0 +
                    p1 * p2 * p3 * p4 * p5 * f / (x * x * x * x * x) / 30240.0;
  return direct + em;
}

namespace {

constexpr std::size_t kTailTerms = 1000000;

struct TailSums {
  double h = 0.0, h2 = 0.0, h3 = 0.0;
};

// Sums over i = 2..kTailTerms of the limiting entries, accumulated backwards
// from the smallest terms, plus an integral estimate of the remainder.
TailSums power_law_tail_sums(double p) {
  TailSums s;
  double tail = power_tail(kTailTerms, p);
  for (std::size_t i = kTailTerms; i >= 2; --i) {
    if (i < kTailTerms) tail += std::pow(static_cast<double>(i), -p);
    s.h -= tail;
    s.h2 += tail * tail;
    s.h3 += tail * tail * tail;
  }
  // Beyond kTailTerms the entries behave like x^(1-p)/(p-1); midpoint-shifted integrals.
  const double x = static_cast<double>(kTailTerms) + 0.5;
  const double c = 1.0 / (p - 1.0);
  s.h -= c * std::pow(x, 2.0 - p) / (p - 2.0);
  s.h2 += c * c * std::pow(x, 3.0 - 2.0 * p) / (2.0 * p - 3.0);
  s.h3 += c * c * c * std::pow(x, 4.0 - 3.0 * p) / (3.0 * p - 4.0);
  return s;
}

}  // namespace

ForceSequence ForceSequence::none(std::size_t bonds) {
  if (bonds < 2) throw InvalidInput("a chain needs at least two bonds");
  ForceSequence f;
  f.kind_ = ForceKind::none;
  f.h_.assign(bonds, 0.0);
  return f;
}

ForceSequence ForceSequence::explicit_list(std::vector<double> entries, std::size_t bonds) {
  if (bonds < 2) throw InvalidInput("a chain needs at least two bonds");
  if (entries.size() > bonds) {
    throw InvalidInput("explicit force list has " + std::to_string(entries.size()) + " entries but the chain has " +
                       std::to_string(bonds) + " bonds");
  }
  for (double h : entries) {
    if (!std::isfinite(h)) throw InvalidInput("force entries must be finite");
  }
  ForceSequence f;
  f.kind_ = ForceKind::explicit_list;
  f.limit_ = entries;
  f.h_ = std::move(entries);
  f.h_.resize(bonds, 0.0);
  for (std::size_t i = 2; i <= f.limit_.size(); ++i) {
    const double h = f.limit_[i - 1];
    f.tail_sum_ += h;
    f.tail_sum_squares_ += h * h;
    f.tail_sum_cubes_ += std::abs(h * h * h);
  }
  return f;
}

ForceSequence ForceSequence::power_law(double exponent, std::size_t bonds) {
  if (bonds < 2) throw InvalidInput("a chain needs at least two bonds");
  if (!(exponent > 2.0) || !std::isfinite(exponent)) {
    throw InvalidInput("power-law force exponent p must exceed 2 for the loads to be summable, got " +
                       std::to_string(exponent));
  }
  ForceSequence f;
  f.kind_ = ForceKind::power_law;
  f.exponent_ = exponent;
  f.h_.assign(bonds, 0.0);
  double acc = 0.0;
  for (std::size_t i = bonds - 1; i >= 1; --i) {
    acc += std::pow(static_cast<double>(i), -exponent);
    f.h_[i - 1] = -acc;
  }
  const auto sums = power_law_tail_sums(exponent);
  f.tail_sum_ = sums.h;
  f.tail_sum_squares_ = sums.h2;
  f.tail_sum_cubes_ = sums.h3;
  return f;
}

double ForceSequence::limit_at(std::size_t i) const {
  if (i == 0) return 0.0;
  switch (kind_) {
    case ForceKind::none:
      return 0.0;
    case ForceKind::explicit_list:
      return i <= limit_.size() ? limit_[i - 1] : 0.0;
    case ForceKind::power_law:
      return -power_tail(i, exponent_);
  }
  return 0.0;
}

double ForceSequence::partial_tail_sum(std::size_t n) const {
  if (kind_ != ForceKind::power_law) {
    double s = 0.0;
    for (std::size_t i = 2; i <= std::min(n, limit_.size()); ++i) s += limit_[i - 1];
    return s;
  }
  double s = 0.0;
  if (n < 2) return s;
  double tail = power_tail(n, exponent_);
  for (std::size_t i = n; i >= 2; --i) {
    if (i < n) tail += std::pow(static_cast<double>(i), -exponent_);
    s -= tail;
  }
  return s;
}

double ForceSequence::partial_tail_sum_squares(std::size_t n) const {
  if (kind_ != ForceKind::power_law) {
    double s = 0.0;
    for (std::size_t i = 2; i <= std::min(n, limit_.size()); ++i) s += limit_[i - 1] * limit_[i - 1];
    return s;
  }
  double s = 0.0;
  if (n < 2) return s;
  double tail = power_tail(n, exponent_);
  for (std::size_t i = n; i >= 2; --i) {
    if (i < n) tail += std::pow(static_cast<double>(i), -exponent_);
    s += tail * tail;
  }
  return s;
}

// For p > 2 the limiting entries satisfy |h_i| <= (i-1)^(1-p)/(p-1), and the
// sum of k^(1-p) over k >= n is at most n^(1-p) + n^(2-p)/(p-2).
double ForceSequence::tail_remainder_bound(std::size_t n) const {
  if (kind_ != ForceKind::power_law) {
    double s = 0.0;
    for (std::size_t i = n + 1; i <= limit_.size(); ++i) s += std::abs(limit_[i - 1]);
    return s;
  }
  const double p = exponent_;
  const double x = static_cast<double>(std::max<std::size_t>(n, 1));
  return (std::pow(x, 1.0 - p) + std::pow(x, 2.0 - p) / (p - 2.0)) / (p - 1.0);
}

double ForceSequence::tail_squares_remainder_bound(std::size_t n) const {
  if (kind_ != ForceKind::power_law) {
    double s = 0.0;
    for (std::size_t i = n + 1; i <= limit_.size(); ++i) s += limit_[i - 1] * limit_[i - 1];
    return s;
  }
  const double p = exponent_;
  const double x = static_cast<double>(std::max<std::size_t>(n, 1));
  return (std::pow(x, 2.0 - 2.0 * p) + std::pow(x, 3.0 - 2.0 * p) / (2.0 * p - 3.0)) / ((p - 1.0) * (p - 1.0));
}

double ForceSequence::l1_norm() const {
  double s = 0.0;
  for (double h : h_) s += std::abs(h);
  return s;
}

bool ForceSequence::all_zero() const {
  return std::all_of(h_.begin(), h_.end(), [](double h) { return h == 0.0; }) && tail_sum_squares_ == 0.0;
}

ForceSequence build_force_sequence(const ForceSpec& spec, std::size_t bonds) {
  switch (spec.kind) {
    case ForceKind::none:
      return ForceSequence::none(bonds);
    case ForceKind::explicit_list:
      return ForceSequence::explicit_list(spec.entries, bonds);
    case ForceKind::power_law:
      return ForceSequence::power_law(spec.exponent, bonds);
  }
  throw InvalidInput("unknown force kind");
}

}  // namespace defectfe
