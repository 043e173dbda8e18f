#include "defectfe/coarse_grain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "defectfe/errors.hpp"
#include "defectfe/roots.hpp"

namespace defectfe {

void ChainSpec::validate() const {
  if (N < 2) throw InvalidInput("N must be at least 2 (got " + std::to_string(N) + ")");
  if (!std::isfinite(A)) throw InvalidInput("A must be finite");
  if (beta != 1.0) throw InvalidInput("beta must equal 1");
  if (forces.bonds() != 0 && forces.bonds() != N) {
    throw InvalidInput("force sequence has " + std::to_string(forces.bonds()) + " bonds, chain has " +
                       std::to_string(N));
  }
}

CoarseGrainedChain::CoarseGrainedChain(ChainSpec spec, QuadratureConfig cfg, CoarseGrainOptions opt)
    : spec_((spec.validate(), std::move(spec))),
      opt_(opt),
      cb_(spec_.psi, cfg, Interval{spec_.A - 8.0, spec_.A + 8.0}) {
  if (opt_.exact_bonds < 0) throw InvalidInput("exact_bonds must be non-negative");
  at_A_ = cb_.eval(spec_.A);
  phi0_ = at_A_.W_prime * spec_.A - at_A_.W;
}

double CoarseGrainedChain::defect_floor() const {
  const double f = curvature_floor(spec_.psi, spec_.defect, cb_.window());
  if (!(f > 0.0)) throw InvalidInput("psi + P is not uniformly convex on the window");
  return f;
}

RelaxationResult CoarseGrainedChain::solve_lambda(double y) const {
  const std::size_t N = spec_.N;
  const double bonds = static_cast<double>(N - 1);
  const double target = static_cast<double>(N) * spec_.A - y;
  RelaxationResult out;

  if (!spec_.has_forces()) {
    const StrainEnergy e = cb_.eval(target / bonds);
    const Moments m = cb_.tilted_moments(e.W_prime);
    out.lambda = e.W_prime;
    out.bond_strains.assign(N - 1, m.mean);
    out.energy = bonds * (e.W - at_A_.W);
    out.residual = target - bonds * m.mean;
    out.compliance = bonds * m.variance;
    return out;
  }

  // Loads with equal values share one tilted-moment evaluation.
  std::map<double, int> groups;
  for (std::size_t i = 2; i <= N; ++i) ++groups[spec_.forces.at(i)];
  std::map<double, Moments> last;
  auto residual = [&](double lambda) {
    double sum = 0.0, slope = 0.0;
    for (const auto& [h, count] : groups) {
      const Moments m = cb_.tilted_moments(lambda - h);
      last[h] = m;
      sum += count * m.mean;
      slope += count * m.variance;
    }
    return Sloped{sum - target, slope};
  };
  double mean_h = 0.0;
  for (std::size_t i = 2; i <= N; ++i) mean_h += spec_.forces.at(i);
  mean_h /= bonds;

  MonotoneSolveOptions opt;
  opt.min_slope = bonds / cb_.kappa2();
  opt.max_slope = bonds / cb_.kappa1();
  opt.tol = opt_.lambda_tol * (1.0 + static_cast<double>(N) * std::abs(spec_.A));
  const double x0 = spec_.psi.eval(target / bonds).d1 + mean_h;
  const RootResult r = solve_increasing(residual, x0, opt);
  const Sloped fin = residual(r.x);
  if (!(std::abs(fin.value) <= 1e-9 * (1.0 + static_cast<double>(N) * std::abs(spec_.A)))) {
    throw NumericalFailure("lambda equation did not converge (residual " + std::to_string(fin.value) + ")");
  }

  out.lambda = r.x;
  out.residual = fin.value;
  out.compliance = fin.slope;
  out.bond_strains.reserve(N - 1);
  double gap = 0.0;
  for (std::size_t i = 2; i <= N; ++i) {
    const Moments& m = last.at(spec_.forces.at(i));
    out.bond_strains.push_back(m.mean);
  }
  for (const auto& [h, count] : groups) gap += count * (last.at(h).log_mass - phi0_);
  out.energy = r.x * (spec_.A - y) + bonds * (r.x - sigma0()) * spec_.A - gap;
  return out;
}

Jet CoarseGrainedChain::finite_energy_unloaded(double y) const {
  const double bonds = static_cast<double>(spec_.N - 1);
  const StrainEnergy e = cb_.eval(spec_.A + (spec_.A - y) / bonds);
  return {bonds * (e.W - at_A_.W), -e.W_prime, e.W_second / bonds};
}

Jet CoarseGrainedChain::finite_energy(double y) const {
  if (!spec_.has_forces()) return finite_energy_unloaded(y);
  const RelaxationResult r = solve_lambda(y);
  return {r.energy, -r.lambda, 1.0 / r.compliance};
}

double CoarseGrainedChain::psi_second_derivative() const {
  const double d = 1e-3 * std::sqrt(cb_.kappa1());
  const double hi = cb_.tilted_moments(sigma0() + d).variance;
  const double lo = cb_.tilted_moments(sigma0() - d).variance;
  return (hi - lo) / (2.0 * d);
}

LimitEnergy CoarseGrainedChain::exterior_relaxation() const {
  const ForceSequence& f = spec_.forces;
  LimitEnergy out;
  if (f.kind() == ForceKind::none) return out;

  // Exact per-bond minimum of W(A+z) - W(A) - W'(A) z + h z.
  auto exact = [&](double h) {
    if (h == 0.0) return 0.0;
    return -(cb_.phi(sigma0() - h) - phi0_ + h * spec_.A);
  };

  if (f.kind() == ForceKind::explicit_list) {
    for (std::size_t i = 2; i <= f.bonds(); ++i) out.value += exact(f.limit_at(i));
    return out;
  }

  const std::size_t last = static_cast<std::size_t>(opt_.exact_bonds) + 1;
  double squares = 0.0, cubes = 0.0;
  for (std::size_t i = 2; i <= last; ++i) {
    const double h = f.limit_at(i);
    out.value += exact(h);
    squares += h * h;
    cubes += std::abs(h * h * h);
  }
  const double tail_squares = f.tail_sum_squares() - squares;
  const double tail_cubes = std::max(0.0, f.tail_sum_cubes() - cubes);
  out.value -= tail_squares / (2.0 * at_A_.W_second);
  out.tail_error = 2.0 * std::abs(psi_second_derivative()) * tail_cubes / 6.0;
  if (out.tail_error > opt_.tail_error_budget) {
    throw NumericalFailure("Taylor tail of the exterior relaxation exceeds its error budget (" +
                           std::to_string(out.tail_error) + ")");
  }
  return out;
}

LimitEnergy CoarseGrainedChain::limit_energy(double y) const {
  LimitEnergy out = exterior_relaxation();
  out.value += (spec_.A - y) * sigma0() + spec_.A * spec_.forces.tail_sum();
  return out;
}

double CoarseGrainedChain::free_energy() const {
  const Potential& psi = spec_.psi;
  const Potential& P = spec_.defect.potential;
  const double h1 = spec_.forces.at(1);
  const QuadratureConfig& cfg = cb_.quadrature();

  auto numerator = [&](double y) -> Jet {
    const Jet b = psi.eval(y) + P.eval(y);
    const Jet e = finite_energy(y);
    return {-b.value - h1 * y - e.value, -b.d1 - h1 - e.d1, -b.d2 - e.d2};
  };
  auto denominator = [&](double y) -> Jet {
    const Jet b = psi.eval(y);
    const Jet e = finite_energy_unloaded(y);
    return {-b.value - e.value, -b.d1 - e.d1, -b.d2 - e.d2};
  };
  const double num = log_integral_exp(numerator, defect_floor(), spec_.A, cfg);
  const double den = log_integral_exp(denominator, cb_.kappa1(), spec_.A, cfg);
  return -(num - den);
}

double CoarseGrainedChain::limit_free_energy() const {
  const Potential& psi = spec_.psi;
  const Potential& P = spec_.defect.potential;
  const double h1 = spec_.forces.limit_at(1);
  const double s0 = sigma0();
  const QuadratureConfig& cfg = cb_.quadrature();

  auto numerator = [&](double y) -> Jet {
    const Jet b = psi.eval(y) + P.eval(y);
    return {-b.value + (s0 - h1) * y, -b.d1 + s0 - h1, -b.d2};
  };
  auto denominator = [&](double y) -> Jet {
    const Jet b = psi.eval(y);
    return {-b.value + s0 * y, -b.d1 + s0, -b.d2};
  };
  const double num = log_integral_exp(numerator, defect_floor(), spec_.A, cfg);
  const double den = log_integral_exp(denominator, cb_.kappa1(), spec_.A, cfg);
  return -(num - den) + spec_.A * spec_.forces.tail_sum() + exterior_relaxation().value;
}

}  // namespace defectfe
