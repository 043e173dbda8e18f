#pragma once

#include <cstddef>
#include <vector>

#include "defectfe/cauchy_born.hpp"
#include "defectfe/potentials.hpp"

namespace defectfe {

/// One chain: N bonds, boundary atoms pinned at u_0 = 0 and u_N = N A, bond
/// energy psi_i(y) = psi(y) + h_i y and a defect P on the first bond.
struct ChainSpec {
  std::size_t N = 2;
  double A = 1.0;
  Potential psi = Potential::harmonic(1.0);
  DefectSpec defect;
  ForceSequence forces;  // empty means no loads
  double beta = 1.0;

  void validate() const;
  bool has_forces() const { return !forces.all_zero(); }
};

struct RelaxationResult {
  double lambda = 0.0;
  std::vector<double> bond_strains;  // bonds 2..N
  double energy = 0.0;
  double residual = 0.0;
  double compliance = 0.0;  // sum of Psi'(lambda - h_i), i.e. d(NA - y)/d lambda
};

struct LimitEnergy {
  double value = 0.0;
  double tail_error = 0.0;  // estimated error of the Taylor-treated tail
};

struct CoarseGrainOptions {
  int exact_bonds = 4;                // bonds 2..exact_bonds+1 relaxed exactly in J_inf
  double tail_error_budget = 1e-6;
  double lambda_tol = 1e-11;          // scaled by 1 + N|A|
};

/// Coarse-grained energies of a chain whose exterior (bonds 2..N) is replaced
/// by Cauchy-Born bonds.  Holds the strain-energy evaluator and the values at
/// the applied strain that every query reuses.
class CoarseGrainedChain {
 public:
  explicit CoarseGrainedChain(ChainSpec spec, QuadratureConfig cfg = {}, CoarseGrainOptions opt = {});

  const ChainSpec& spec() const { return spec_; }
  const CauchyBornEvaluator& evaluator() const { return cb_; }
  double sigma0() const { return at_A_.W_prime; }
  const StrainEnergy& strain_energy() const { return at_A_; }

  /// lambda with N A - y = sum_{i=2}^N Psi(lambda - h_i).
  RelaxationResult solve_lambda(double y) const;

  /// E_N^cg(y) with derivatives in y: d/dy = -lambda, d2/dy2 = 1 / sum Psi'.
  Jet finite_energy(double y) const;
  /// Same with loads and defect ignored.
  Jet finite_energy_unloaded(double y) const;

  /// E^cg(y) = (A - y) W'(A) + A H + inf J_inf.
  LimitEnergy limit_energy(double y) const;
  /// inf J_inf, the relaxation energy of the loaded infinite exterior.
  LimitEnergy exterior_relaxation() const;

  /// G_N^cg: log-ratio of the one-dimensional integrals over the first bond.
  double free_energy() const;
  /// G_inf.
  double limit_free_energy() const;

  /// Psi'' at sigma0 by central differences of the tilted variance.
  double psi_second_derivative() const;

 private:
  double defect_floor() const;

  ChainSpec spec_;
  CoarseGrainOptions opt_;
  CauchyBornEvaluator cb_;
  StrainEnergy at_A_;
  double phi0_ = 0.0;
};

}  // namespace defectfe
