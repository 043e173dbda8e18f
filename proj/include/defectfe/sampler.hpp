#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "defectfe/coarse_grain.hpp"

namespace defectfe {

struct MalaConfig {
  double step = 0.05;
  std::size_t steps_per_stage = 100000;
  double burn_in = 0.2;  // fraction of each stage discarded
  std::uint64_t seed = 1;
  std::size_t replicas = 100;
  std::size_t stages = 100;
  bool adapt = true;  // tune the step toward [target_lo, target_hi] during burn-in
  double target_lo = 0.5;
  double target_hi = 0.7;
  unsigned workers = 0;  // 0: hardware concurrency

  void validate() const;
  std::size_t burn_in_steps() const;
};

struct FreeEnergyEstimate {
  double value = 0.0;
  double std_error = 0.0;  // replica standard deviation over sqrt(replicas)
  std::size_t replicas = 0;
  std::vector<double> replica_values;
  std::vector<double> stage_acceptance;  // post-burn-in, averaged over replicas
  std::size_t total_samples = 0;
  std::size_t rejected_nonfinite = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

struct EnergyGradient {
  double energy = 0.0;
  Eigen::VectorXd gradient;
};

/// V(u) + lambda dV(u) over the interior atoms u_1..u_{N-1}, where V is the
/// unloaded chain and dV(u) = P(u_1) + sum h_i (u_i - u_{i-1}).
EnergyGradient chain_energy_and_gradient(const ChainSpec& spec, const Eigen::VectorXd& u, double lambda);

/// dV(u) alone.
double chain_perturbation(const ChainSpec& spec, const Eigen::VectorXd& u);

struct MalaState {
  Eigen::VectorXd q;
  double energy = 0.0;
  Eigen::VectorXd gradient;
};

/// One MALA move with a given standard normal increment xi and uniform
/// variate in [0, 1).  Proposal q* = q - h grad V(q) + sqrt(2h) xi; the
/// acceptance ratio uses the transition density exp(-|q' - q + h grad V(q)|^2 / 4h).
/// `oracle(q)` returns EnergyGradient.  Returns true on acceptance; a
/// non-finite proposal energy is rejected and flagged through `nonfinite`.
template <typename Oracle>
bool mala_step(MalaState& s, Oracle&& oracle, double h, const Eigen::VectorXd& xi, double uniform,
               bool* nonfinite = nullptr) {
  Eigen::VectorXd proposal = s.q - h * s.gradient + std::sqrt(2.0 * h) * xi;
  EnergyGradient p = oracle(proposal);
  if (!std::isfinite(p.energy) || !p.gradient.allFinite()) {
    if (nonfinite) *nonfinite = true;
    return false;
  }
  const double forward = (proposal - s.q + h * s.gradient).squaredNorm();
  const double backward = (s.q - proposal + h * p.gradient).squaredNorm();
  const double log_r = -p.energy + s.energy - (backward - forward) / (4.0 * h);
  if (std::log(uniform) < log_r) {
    s.q = std::move(proposal);
    s.energy = p.energy;
    s.gradient = std::move(p.gradient);
    return true;
  }
  return false;
}

/// Same, drawing the increment and the uniform from `rng`.
template <typename Oracle>
bool mala_step(MalaState& s, Oracle&& oracle, double h, std::mt19937_64& rng, bool* nonfinite = nullptr) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(s.q.size());
  for (Eigen::Index k = 0; k < xi.size(); ++k) xi[k] = normal(rng);
  const double uniform = std::generate_canonical<double, 53>(rng);
  return mala_step(s, oracle, h, xi, uniform, nonfinite);
}

/// Seed of replica r derived from the master seed, independent of the
/// replica count.
std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica);

/// Staged free-energy perturbation from the unloaded chain to the defective,
/// loaded one with stages lambda_i = i / stages.
FreeEnergyEstimate staged_fep(const ChainSpec& spec, const MalaConfig& cfg);

/// staged_fep with provenance attached.
FreeEnergyEstimate estimate_G_N(const ChainSpec& spec, const MalaConfig& cfg);

/// FNV-1a hash of the canonical text of spec and config.
std::uint64_t provenance_hash(const ChainSpec& spec, const MalaConfig& cfg);

}  // namespace defectfe
