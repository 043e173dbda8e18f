#include "defectfe/cauchy_born.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <iomanip>
#include <ostream>
#include <string>

#include "defectfe/roots.hpp"

namespace defectfe {

namespace {

// Tilted exponent -psi(y) - extra(y) + sigma y with derivatives.
struct TiltedExponent {
  const Potential* psi;
  const Potential* extra;
  double sigma;

  Jet operator()(double y) const {
    Jet j = psi->eval(y);
    if (extra) j += extra->eval(y);
    return {-j.value + sigma * y, -j.d1 + sigma, -j.d2};
  }
};

}  // namespace

CauchyBornEvaluator::CauchyBornEvaluator(Potential psi, QuadratureConfig cfg, Interval window)
    : psi_(std::move(psi)), cfg_(cfg), window_(window) {
  cfg_.validate();
  const Interval k = psi_.curvature_range(window_);
  if (!(k.lo > 0.0)) {
    throw InvalidInput("bond potential is not uniformly convex on the window (min psi'' = " + std::to_string(k.lo) +
                       ")");
  }
  kappa1_ = k.lo;
  kappa2_ = k.hi;
}

Moments CauchyBornEvaluator::tilted_moments(double sigma) const {
  // Zero-temperature peak: psi'(y) = sigma, close to the tilted mean.
  const double hint = psi_.kind() == PotentialKind::harmonic ? sigma / (2.0 * psi_.stiffness()) : 0.0;
  return log_moments(TiltedExponent{&psi_, nullptr, sigma}, kappa1_, hint, cfg_);
}

Moments CauchyBornEvaluator::tilted_moments_with(const Potential& extra, double sigma) const {
  const double floor = curvature_floor(psi_, DefectSpec{extra}, window_);
  if (!(floor > 0.0)) throw InvalidInput("psi + P is not uniformly convex on the window");
  return log_moments(TiltedExponent{&psi_, &extra, sigma}, floor, 0.0, cfg_);
}

double CauchyBornEvaluator::phi(double sigma) const {
  const double hint = psi_.kind() == PotentialKind::harmonic ? sigma / (2.0 * psi_.stiffness()) : 0.0;
  return log_integral_exp(TiltedExponent{&psi_, nullptr, sigma}, kappa1_, hint, cfg_);
}

TiltedMean CauchyBornEvaluator::psi_map(double sigma) const {
  const Moments m = tilted_moments(sigma);
  return {m.mean, m.variance};
}

double CauchyBornEvaluator::solve_sigma(double strain) const { return eval_direct(strain).W_prime; }

StrainEnergy CauchyBornEvaluator::eval_direct(double strain) const {
  if (!std::isfinite(strain)) throw InvalidInput("strain must be finite");
  Moments last;
  double last_sigma = std::numeric_limits<double>::quiet_NaN();
  auto residual = [&](double sigma) {
    last = tilted_moments(sigma);
    last_sigma = sigma;
    return Sloped{last.mean - strain, last.variance};
  };
  MonotoneSolveOptions opt;
  opt.min_slope = 1.0 / kappa2_;
  opt.max_slope = 1.0 / kappa1_;
  opt.tol = 1e-13 * (1.0 + std::abs(strain));
  const RootResult r = solve_increasing(residual, psi_.eval(strain).d1, opt);
  if (!(std::abs(r.residual) <= 1e-10 * (1.0 + std::abs(strain)))) {
    throw NumericalFailure("solve_sigma did not reach tolerance at strain " + std::to_string(strain) +
                           " (residual " + std::to_string(r.residual) + ")");
  }
  if (last_sigma != r.x) residual(r.x);
  StrainEnergy e;
  e.W_prime = r.x;
  e.W = r.x * strain - last.log_mass;
  e.W_second = 1.0 / last.variance;
  return e;
}

double CauchyBornEvaluator::phi_defect_gap(const DefectSpec& defect, double sigma) const {
  if (defect.absent()) return 0.0;
  return tilted_moments_with(defect.potential, sigma).mean - tilted_moments(sigma).mean;
}

StrainEnergy CauchyBornEvaluator::eval(double strain) const {
  return table_ ? eval_table(strain) : eval_direct(strain);
}

CauchyBornEvaluator CauchyBornEvaluator::tabulate(Interval range, int nodes) const {
  if (nodes < 8) throw InvalidInput("tabulation needs at least 8 nodes");
  if (!std::isfinite(range.lo) || !std::isfinite(range.hi) || !(range.hi > range.lo)) {
    throw InvalidInput("tabulation range is degenerate");
  }
  auto t = std::make_shared<Table>();
  t->range = range;
  t->step = range.width() / (nodes - 1);
  for (int k = 0; k < nodes; ++k) {
    const double a = (k + 1 == nodes) ? range.hi : range.lo + t->step * k;
    const StrainEnergy e = eval_direct(a);
    t->strain.push_back(a);
    t->W.push_back(e.W);
    t->W1.push_back(e.W_prime);
    t->W2.push_back(e.W_second);
  }
  CauchyBornEvaluator out = *this;
  out.table_ = std::move(t);
  return out;
}

Interval CauchyBornEvaluator::table_range() const {
  if (!table_) throw InvalidInput("evaluator is not tabulated");
  return table_->range;
}

// Quintic Hermite interpolation from W, W', W'' at the two panel nodes.
StrainEnergy CauchyBornEvaluator::eval_table(double strain) const {
  const Table& t = *table_;
  if (!(strain >= t.range.lo && strain <= t.range.hi)) {
    throw InvalidInput("strain " + std::to_string(strain) + " outside tabulated range [" +
                       std::to_string(t.range.lo) + ", " + std::to_string(t.range.hi) + "]");
  }
  const auto last = static_cast<std::ptrdiff_t>(t.strain.size()) - 2;
  const auto k = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>((strain - t.range.lo) / t.step), 0, last);
  const double h = t.strain[k + 1] - t.strain[k];
  const double s = (strain - t.strain[k]) / h;
  const double a0 = t.W[k];
  const double a1 = h * t.W1[k];
  const double a2 = 0.5 * h * h * t.W2[k];
  const double P = t.W[k + 1] - (a0 + a1 + a2);
  const double D = h * t.W1[k + 1] - (a1 + 2.0 * a2);
  const double S = h * h * t.W2[k + 1] - 2.0 * a2;
  const double a3 = 10.0 * P - 4.0 * D + 0.5 * S;
  const double a4 = -15.0 * P + 7.0 * D - S;
  const double a5 = 6.0 * P - 3.0 * D + 0.5 * S;
  StrainEnergy e;
  e.W = a0 + s * (a1 + s * (a2 + s * (a3 + s * (a4 + s * a5))));
  e.W_prime = (a1 + s * (2.0 * a2 + s * (3.0 * a3 + s * (4.0 * a4 + s * 5.0 * a5)))) / h;
  e.W_second = (2.0 * a2 + s * (6.0 * a3 + s * (12.0 * a4 + s * 20.0 * a5))) / (h * h);
  return e;
}

void CauchyBornEvaluator::write_table_csv(std::ostream& out) const {
  if (!table_) throw InvalidInput("evaluator is not tabulated");
  const auto old = out.precision(17);
  out << "A,W,W_prime,W_second\n";
  for (std::size_t k = 0; k < table_->strain.size(); ++k) {
    out << table_->strain[k] << ',' << table_->W[k] << ',' << table_->W1[k] << ',' << table_->W2[k] << '\n';
  }
  out.precision(old);
}

}  // namespace defectfe
