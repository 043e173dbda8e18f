#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace defectfe {

/// Value and first two derivatives of a scalar function at a point.
struct Jet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  Jet& operator+=(const Jet& o) {
    value += o.value;
    d1 += o.d1;
    d2 += o.d2;
    return *this;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

enum class PotentialKind { harmonic, quartic_paper, polynomial };

std::string to_string(PotentialKind kind);

/// Textual description of a bond potential, as found in run configurations.
///
/// Recognised kinds and their parameters:
///   "harmonic"       {alpha}          alpha * y^2, alpha > 0
///   "quartic-paper"  {}               (y-1)^4 / 2 + y^2 / 2
///   "polynomial"     {c0, c1, ...}    sum_k c_k y^k
///   "none"           {}               identically zero (defects only)
struct PotentialSpec {
  std::string kind;
  std::vector<double> parameters;
};

/// A bond energy psi(y) with exact first and second derivatives.
///
/// All kinds are polynomials; the coefficient list is kept for every kind so
/// that curvature bounds can be found from the roots of psi''' on a window.
class Potential {
 public:
  Potential() = default;

  static Potential harmonic(double alpha);
  static Potential quartic_paper();
  static Potential polynomial(std::vector<double> coefficients);
  static Potential zero() { return polynomial({}); }

  Jet eval(double y) const;
  double value(double y) const { return eval(y).value; }

  PotentialKind kind() const { return kind_; }
  std::span<const double> coefficients() const { return coeffs_; }
  bool is_zero() const;

  /// Stiffness alpha of a harmonic potential; throws for other kinds.
  double stiffness() const;

  /// Exact min and max of psi'' over the window.
  Interval curvature_range(Interval window) const;

 private:
  PotentialKind kind_ = PotentialKind::polynomial;
  std::vector<double> coeffs_;
  double alpha_ = 0.0;
};

Potential make_potential(const PotentialSpec& spec);

/// Defect energy P, acting on the first bond only.
struct DefectSpec {
  Potential potential = Potential::zero();

  bool absent() const { return potential.is_zero(); }
  double value(double y) const { return potential.value(y); }
};

/// Curvature bounds of psi and psi + P over a sampling grid.
struct AssumptionReport {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double varsigma1 = 0.0;
  double varsigma2 = 0.0;
  Interval window;
  std::size_t grid_points = 0;
  bool pass = false;
};

AssumptionReport check_assumptions(const Potential& psi, const DefectSpec& defect,
                                   Interval window, std::size_t grid_points);

/// Lower curvature bound of psi + P on the window, exact for the built-in
/// polynomial kinds.
double curvature_floor(const Potential& psi, const DefectSpec& defect, Interval window);

// ---------------------------------------------------------------------------
// External loads

enum class ForceKind { none, explicit_list, power_law };

struct ForceSpec {
  ForceKind kind = ForceKind::none;
  std::vector<double> entries;  // h_1, h_2, ... for explicit lists
  double exponent = 0.0;        // p for node forces f_j = j^-p
};

/// Bond loads h_1..h_N of a chain with N bonds, together with the tail sums of
/// the limiting (N -> infinity) sequence.
///
/// For power-law node forces the finite-chain entries are
/// h_i = -sum_{j=i}^{N-1} j^-p (so h_N = 0) and the limiting entries are
/// h_i = -sum_{j>=i} j^-p.  Explicit lists are their own limit.
class ForceSequence {
 public:
  ForceSequence() = default;

  static ForceSequence none(std::size_t bonds);
  static ForceSequence explicit_list(std::vector<double> entries, std::size_t bonds);
  static ForceSequence power_law(double exponent, std::size_t bonds);

  ForceKind kind() const { return kind_; }
  double exponent() const { return exponent_; }
  std::size_t bonds() const { return h_.size(); }

  /// h_i of the finite chain, 1-based; zero past the last bond.
  double at(std::size_t i) const { return (i >= 1 && i <= h_.size()) ? h_[i - 1] : 0.0; }
  std::span<const double> entries() const { return h_; }

  /// h_i of the limiting sequence, 1-based.
  double limit_at(std::size_t i) const;

  double tail_sum() const { return tail_sum_; }                  // H
  double tail_sum_squares() const { return tail_sum_squares_; }  // H-bar
  double tail_sum_cubes() const { return tail_sum_cubes_; }      // sum_{i>=2} |h_i|^3

  /// sum_{i=2}^{n} of the limiting entries and a bound on |H - that sum|.
  double partial_tail_sum(std::size_t n) const;
  double tail_remainder_bound(std::size_t n) const;
  /// Same for the squares.
  double partial_tail_sum_squares(std::size_t n) const;
  double tail_squares_remainder_bound(std::size_t n) const;

  /// Sum of |h_i| over the finite entries.
  double l1_norm() const;
  bool all_zero() const;

 private:
  ForceKind kind_ = ForceKind::none;
  double exponent_ = 0.0;
  std::vector<double> h_;
  std::vector<double> limit_;  // explicit lists only
  double tail_sum_ = 0.0;
  double tail_sum_squares_ = 0.0;
  double tail_sum_cubes_ = 0.0;
};

ForceSequence build_force_sequence(const ForceSpec& spec, std::size_t bonds);

/// sum_{j>=i} j^-p for p > 1, accurate to rounding.
double power_tail(std::size_t i, double p);

}  // namespace defectfe
