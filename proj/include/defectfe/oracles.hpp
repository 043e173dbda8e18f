#pragma once

#include <cstddef>
#include <vector>

#include "defectfe/coarse_grain.hpp"
#include "defectfe/quadrature.hpp"

namespace defectfe {

/// psi(y) = alpha y^2, P(y) = beta y^2, optional loads through h_1, H, H-bar.
struct HarmonicParams {
  double alpha = 1.0;
  double beta = 1.0;
  double A = 1.0;
  std::size_t N = 2;
  double h1 = 0.0;
  double H = 0.0;
  double H_bar = 0.0;

  void validate() const;
};

/// Closed-form G_N of the harmonic chain without loads.
double harmonic_G_N(const HarmonicParams& p);

/// Closed-form thermodynamic limit, load terms included.
double harmonic_G_inf(const HarmonicParams& p);

/// G_N of a harmonic chain with arbitrary finite loads, by Gaussian
/// integration of the full (N-1)-dimensional quadratic form (Cholesky).
double gaussian_chain_G_N(double alpha, double beta, double A, std::size_t N, const std::vector<double>& h = {});

/// G_N by nested log-space quadrature over the interior atoms, N <= 4.
double dense_G_N(const ChainSpec& spec, const QuadratureConfig& cfg = {});

/// G_N by repeated numerical convolution of the tilted bond densities on a
/// uniform grid.  Works for any N; the grid spacing is adjusted so that N A
/// is a grid point.
struct TransferOptions {
  double spacing = 0.04;
  double cutoff = 50.0;  // entries below exp(-cutoff) of the maximum are dropped
};
double transfer_G_N(const ChainSpec& spec, const TransferOptions& opt = {});

struct CgRecursion {
  double value = 0.0;
  // Coefficients c_i, d_i, f_i for i = 1..M-1 (index i-1).
  std::vector<double> c, d, f;
};

/// Free-energy difference of the harmonic chain coarsened to M nodes with
/// every coarse bond spanning p atomistic bonds, first bond resolved.
/// K1 = alpha, K2 = beta, x = A; N = p (M - 1) + 1.
CgRecursion harmonic_cg_recursion(std::size_t M, std::size_t p, double K1, double K2, double x);

}  // namespace defectfe
