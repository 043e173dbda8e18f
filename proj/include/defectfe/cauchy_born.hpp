#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "defectfe/potentials.hpp"
#include "defectfe/quadrature.hpp"

namespace defectfe {

/// Mean and variance of the tilted one-bond measure exp(-psi(y) + sigma y).
struct TiltedMean {
  double value = 0.0;  // Psi(sigma)
  double slope = 0.0;  // Psi'(sigma)
};

/// Finite-temperature Cauchy-Born strain energy and its first two derivatives.
struct StrainEnergy {
  double W = 0.0;
  double W_prime = 0.0;
  double W_second = 0.0;
};

/// Cauchy-Born strain energy of a bond potential, defined through the Legendre
/// transform of the single-bond log-partition function
///
///   phi(sigma) = log int exp(-psi(y) + sigma y) dy,
///   W(A)       = sup_sigma { sigma A - phi(sigma) }.
///
/// The supremum is attained at sigma(A) with Psi(sigma) = A, where Psi = phi'
/// is the tilted mean; then W' = sigma and W'' = 1 / Psi'(sigma).
///
/// Evaluators are immutable.  A tabulated evaluator answers W queries from a
/// quintic Hermite interpolant built from exact (W, W', W'') node values and
/// refuses strains outside its range.
class CauchyBornEvaluator {
 public:
  explicit CauchyBornEvaluator(Potential psi, QuadratureConfig cfg = {}, Interval window = {-8.0, 8.0});

  const Potential& potential() const { return psi_; }
  const QuadratureConfig& quadrature() const { return cfg_; }
  Interval window() const { return window_; }
  /// Certified curvature bounds of psi on the window (kappa_1, kappa_2).
  double kappa1() const { return kappa1_; }
  double kappa2() const { return kappa2_; }

  double phi(double sigma) const;
  TiltedMean psi_map(double sigma) const;
  Moments tilted_moments(double sigma) const;
  double solve_sigma(double strain) const;
  StrainEnergy eval(double strain) const;

  /// Difference of tilted means of psi + P and psi.
  double phi_defect_gap(const DefectSpec& defect, double sigma) const;

  /// Log-partition and moments of exp(-(psi + extra)(y) + sigma y).
  Moments tilted_moments_with(const Potential& extra, double sigma) const;

  CauchyBornEvaluator tabulate(Interval range, int nodes) const;
  bool tabulated() const { return table_ != nullptr; }
  Interval table_range() const;

  /// Writes "A,W,W_prime,W_second" rows at 17 significant digits.
  void write_table_csv(std::ostream& out) const;

 private:
  struct Table {
    Interval range;
    double step = 0.0;
    std::vector<double> strain, W, W1, W2;
  };

  StrainEnergy eval_direct(double strain) const;
  StrainEnergy eval_table(double strain) const;

  Potential psi_;
  QuadratureConfig cfg_;
  Interval window_;
  double kappa1_ = 0.0;
  double kappa2_ = 0.0;
  std::shared_ptr<const Table> table_;
};

}  // namespace defectfe
