#include "defectfe/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "defectfe/errors.hpp"

namespace defectfe {

void HarmonicParams::validate() const {
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be positive");
  if (!(beta >= 0.0)) throw InvalidInput("beta must be non-negative");
  if (N < 2) throw InvalidInput("N must be at least 2");
}

double harmonic_G_N(const HarmonicParams& p) {
  p.validate();
  if (p.h1 != 0.0 || p.H != 0.0 || p.H_bar != 0.0) throw InvalidInput("harmonic_G_N has no load terms");
  const double a = p.alpha, b = p.beta, A2 = p.A * p.A;
  const double n = static_cast<double>(p.N);
  const double D = n * (a + b) - b;
  return 0.5 * std::log((a + b) / a) + a * b * A2 / (a + b) - n * a * b * b * A2 / (D * D) +
         a * b * A2 / (a + b) * (2.0 * b / D + b * b / (D * D)) + 0.5 * std::log1p(-b / (n * (a + b)));
}

double harmonic_G_inf(const HarmonicParams& p) {
  p.validate();
  const double a = p.alpha, b = p.beta;
  return a * b * p.A * p.A / (a + b) + 0.5 * std::log((a + b) / a) + a * p.A * p.h1 / (a + b) -
         p.h1 * p.h1 / (4.0 * (a + b)) + p.A * p.H - p.H_bar / (4.0 * a);
}

namespace {

// -log of the integral of exp(-V) over the interior atoms for
// V = sum alpha (u_i - u_{i-1})^2 + h_i (u_i - u_{i-1}) + beta u_1^2,
// dropping the (N-1)/2 log(pi) that cancels in differences.
double gaussian_free_energy(double alpha, double beta, double A, std::size_t N, const std::vector<double>& h) {
  const auto d = static_cast<Eigen::Index>(N - 1);
  auto load = [&](std::size_t i) { return i <= h.size() ? h[i - 1] : 0.0; };
  const double end = static_cast<double>(N) * A;

  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Q(i, i) = 2.0 * alpha;
    if (i + 1 < d) Q(i, i + 1) = Q(i + 1, i) = -alpha;
    const auto k = static_cast<std::size_t>(i) + 1;
    g(i) = load(k) - load(k + 1);
  }
  Q(0, 0) += beta;
  g(d - 1) -= 2.0 * alpha * end;
  const double c = alpha * end * end + load(N) * end;

  const Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success) throw NumericalFailure("quadratic form is not positive definite");
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return c - 0.25 * g.dot(llt.solve(g)) + 0.5 * logdet;
}

}  // namespace

double gaussian_chain_G_N(double alpha, double beta, double A, std::size_t N, const std::vector<double>& h) {
  HarmonicParams{alpha, beta, A, N}.validate();
  if (h.size() > N) throw InvalidInput("more loads than bonds");
  return gaussian_free_energy(alpha, beta, A, N, h) - gaussian_free_energy(alpha, 0.0, A, N, {});
}

double dense_G_N(const ChainSpec& spec, const QuadratureConfig& cfg) {
  spec.validate();
  if (spec.N > 4) throw InvalidInput("dense_G_N supports N <= 4 (got " + std::to_string(spec.N) + ")");
  cfg.validate();
  const std::size_t N = spec.N;
  const double end = static_cast<double>(N) * spec.A;
  const Interval window{spec.A - 8.0, spec.A + 8.0};
  const double kappa = spec.psi.curvature_range(window).lo;
  const double floor = curvature_floor(spec.psi, spec.defect, window);
  if (!(kappa > 0.0) || !(floor > 0.0)) throw InvalidInput("potential is not uniformly convex on the window");

  QuadratureConfig inner = cfg;
  inner.rel_tol = std::max(cfg.rel_tol * 1e-2, 1e-14);
  inner.abs_tol = std::max(cfg.abs_tol * 1e-2, 1e-16);

  auto solve = [&](bool loaded) {
    auto bond = [&](std::size_t i, double y) {
      double v = spec.psi.value(y);
      if (loaded) v += spec.forces.at(i) * y;
      return v;
    };
    // rest(k, u) = log of the integral over u_{k+1}..u_{N-1} given u_k = u.
    std::function<double(std::size_t, double)> rest = [&](std::size_t k, double u) -> double {
      if (k + 1 == N) return -bond(N, end - u);
      auto g = [&](double v) { return -bond(k + 1, v - u) + rest(k + 1, v); };
      const double hint = u + (end - u) / static_cast<double>(N - k);
      return log_integral_exp(g, kappa, hint, inner);
    };
    auto outer = [&](double u) {
      double v = -bond(1, u) + rest(1, u);
      if (loaded) v -= spec.defect.value(u);
      return v;
    };
    return log_integral_exp(outer, loaded ? floor : kappa, spec.A, cfg);
  };
  return -(solve(true) - solve(false));
}

double transfer_G_N(const ChainSpec& spec, const TransferOptions& opt) {
  spec.validate();
  if (!(opt.spacing > 0.0) || !(opt.cutoff > 0.0)) throw InvalidInput("transfer options must be positive");
  const std::size_t N = spec.N;
  double step = opt.spacing;
  if (spec.A != 0.0) step = std::abs(spec.A) / std::max(1.0, std::round(std::abs(spec.A) / opt.spacing));
  const double sigma = spec.psi.eval(spec.A).d1;

  // Tilted log-density of one bond sampled on the grid y = j * step around
  // its peak; returns first index and log values.
  struct Sampled {
    long first = 0;
    std::vector<double> logf;
  };
  auto sample = [&](auto&& exponent) {
    long j = std::lround(spec.A / step);
    // climb to the maximum
    while (exponent((j + 1) * step) > exponent(j * step)) ++j;
    while (exponent((j - 1) * step) > exponent(j * step)) --j;
    const double peak = exponent(j * step);
    long lo = j, hi = j;
    while (exponent((lo - 1) * step) > peak - opt.cutoff) --lo;
    while (exponent((hi + 1) * step) > peak - opt.cutoff) ++hi;
    --lo;
    ++hi;
    Sampled s;
    s.first = lo;
    for (long k = lo; k <= hi; ++k) s.logf.push_back(exponent(k * step));
    return s;
  };
  auto bond = [&](std::size_t i, bool loaded) {
    const double h = loaded ? spec.forces.at(i) : 0.0;
    return sample([&, h](double y) { return -spec.psi.value(y) - h * y + sigma * y; });
  };

  // Convolve bonds 2..N in linear space with running max-normalisation.
  // `first` is the grid index of v[0]; true values are v * exp(log_scale).
  struct Linear {
    long first = 0;
    std::vector<double> v;
    double log_scale = 0.0;
  };
  auto rest = [&](bool loaded) {
    const Sampled last = bond(N, loaded);
    Linear acc;
    acc.first = last.first;
    acc.log_scale = *std::max_element(last.logf.begin(), last.logf.end());
    for (double l : last.logf) acc.v.push_back(std::exp(l - acc.log_scale));
    for (std::size_t i = N - 1; i >= 2; --i) {
      const Sampled b = bond(i, loaded);
      const double mb = *std::max_element(b.logf.begin(), b.logf.end());
      std::vector<double> fb(b.logf.size());
      for (std::size_t k = 0; k < fb.size(); ++k) fb[k] = std::exp(b.logf[k] - mb);
      std::vector<double> out(acc.v.size() + fb.size() - 1, 0.0);
      for (std::size_t a = 0; a < acc.v.size(); ++a) {
        const double va = acc.v[a];
        for (std::size_t k = 0; k < fb.size(); ++k) out[a + k] += va * fb[k];
      }
      const double m = *std::max_element(out.begin(), out.end());
      const double keep = m * std::exp(-opt.cutoff);
      std::size_t lo = 0, hi = out.size() - 1;
      while (lo < hi && out[lo] < keep) ++lo;
      while (hi > lo && out[hi] < keep) --hi;
      Linear next;
      next.first = acc.first + b.first + static_cast<long>(lo);
      next.v.assign(out.begin() + static_cast<long>(lo), out.begin() + static_cast<long>(hi) + 1);
      for (double& x : next.v) x /= m;
      next.log_scale = acc.log_scale + mb + std::log(m) + std::log(step);
      acc = std::move(next);
    }
    return acc;
  };

  // Pair the first bond with the rest at total length N A.
  const long total = std::lround(static_cast<double>(N) * spec.A / step);
  auto log_partition = [&](bool loaded) {
    const Linear acc = rest(loaded);
    const double h = loaded ? spec.forces.at(1) : 0.0;
    auto e = [&, h, loaded](double y) {
      double v = -spec.psi.value(y) - h * y + sigma * y;
      if (loaded) v -= spec.defect.value(y);
      return v;
    };
    const Sampled s = sample(e);
    const double ms = *std::max_element(s.logf.begin(), s.logf.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < s.logf.size(); ++k) {
      const long idx = total - (s.first + static_cast<long>(k)) - acc.first;
      if (idx < 0 || idx >= static_cast<long>(acc.v.size())) continue;
      sum += std::exp(s.logf[k] - ms) * acc.v[static_cast<std::size_t>(idx)];
    }
    if (!(sum > 0.0)) throw NumericalFailure("transfer oracle: densities do not overlap at N A");
    return ms + std::log(sum) + acc.log_scale;
  };
  return -(log_partition(true) - log_partition(false));
}

CgRecursion harmonic_cg_recursion(std::size_t M, std::size_t p, double K1, double K2, double x) {
  if (M < 3) throw InvalidInput("coarse node count M must be at least 3");
  if (p < 1) throw InvalidInput("coarsening factor p must be at least 1");
  if (!(K1 > 0.0) || !(K2 >= 0.0)) throw InvalidInput("stiffnesses must satisfy K1 > 0, K2 >= 0");
  const double N = static_cast<double>(p * (M - 1) + 1);
  const double pd = static_cast<double>(p);
  const double X = N * x;

  CgRecursion out;
  out.c.assign(M - 1, 0.0);
  out.d.assign(M - 1, 0.0);
  out.f.assign(M - 1, 0.0);
  // Complete squares from w_{M-1} down to w_2, then take one more step for
  // the coefficients seen by w_1.
  out.c[M - 2] = 2.0;
  out.d[M - 2] = 1.0;
  out.f[M - 2] = 1.0;
  for (std::size_t i = M - 1; i >= 2; --i) {
    const double c = out.c[i - 1], d = out.d[i - 1], f = out.f[i - 1];
    out.c[i - 2] = 2.0 - 1.0 / c;
    out.d[i - 2] = d / c;
    out.f[i - 2] = f - d * d / c;
  }

  // Energy in w_1: a w_1^2 - b w_1 + const, with K1/p per coarse bond.
  const double k = K1 / pd;
  const double a0 = k * (out.c[0] + pd - 1.0);
  const double aP = a0 + K2;
  const double b = 2.0 * k * out.d[0] * X;
  out.value = 0.25 * b * b * (1.0 / a0 - 1.0 / aP) + 0.5 * std::log(aP / a0);
  return out;
}

}  // namespace defectfe
