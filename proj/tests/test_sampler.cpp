#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "defectfe/oracles.hpp"
#include "defectfe/sampler.hpp"

using namespace defectfe;

namespace {

ChainSpec chain(Potential psi, std::size_t N, double A) {
  ChainSpec s;
  s.N = N;
  s.A = A;
  s.psi = std::move(psi);
  s.defect = {Potential::harmonic(1.0)};
  return s;
}

MalaConfig small(std::uint64_t seed, std::size_t replicas = 8) {
  MalaConfig c;
  c.seed = seed;
  c.replicas = replicas;
  c.stages = 10;
  c.steps_per_stage = 2000;
  c.workers = 2;
  return c;
}

EnergyGradient gaussian(const Eigen::VectorXd& q) { return {0.5 * q.squaredNorm(), q}; }

}  // namespace

TEST_CASE("chain gradient matches central differences") {
  std::mt19937_64 rng(21);
  ChainSpec loaded = chain(Potential::quartic_paper(), 9, 2.0);
  loaded.forces = ForceSequence::power_law(3.0, 9);
  const ChainSpec specs[] = {chain(Potential::harmonic(1.0), 9, 1.0), chain(Potential::quartic_paper(), 9, 2.0),
                             chain(Potential::polynomial({0.0, 0.2, 1.0, 0.0, 0.1}), 9, 0.5), loaded};
  for (const ChainSpec& s : specs) {
    std::normal_distribution<double> jitter(0.0, 0.3);
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd u(8);
      for (int i = 0; i < 8; ++i) u[i] = (i + 1) * s.A + jitter(rng);
      const double lambda = 0.05 * k;
      const EnergyGradient eg = chain_energy_and_gradient(s, u, lambda);
      for (int i = 0; i < 8; ++i) {
        const double e = 1e-6;
        Eigen::VectorXd up = u, dn = u;
        up[i] += e;
        dn[i] -= e;
        const double fd = (chain_energy_and_gradient(s, up, lambda).energy -
                           chain_energy_and_gradient(s, dn, lambda).energy) / (2.0 * e);
        CHECK(std::abs(fd - eg.gradient[i]) <= 1e-6 * (1.0 + std::abs(eg.gradient[i])));
      }
    }
  }
}

TEST_CASE("perturbation is the lambda derivative of the energy") {
  ChainSpec s = chain(Potential::quartic_paper(), 5, 2.0);
  s.forces = ForceSequence::explicit_list({0.2, -0.4, 0.1}, 5);
  Eigen::VectorXd u(4);
  u << 2.3, 3.9, 6.2, 7.7;
  const double d = chain_energy_and_gradient(s, u, 1.0).energy - chain_energy_and_gradient(s, u, 0.0).energy;
  CHECK(chain_perturbation(s, u) == doctest::Approx(d).epsilon(1e-13));
  CHECK_THROWS_AS(chain_perturbation(s, Eigen::VectorXd::Zero(3)), InvalidInput);
}

TEST_CASE("MALA step accepts and rejects by the uniform variate") {
  MalaState s;
  s.q = Eigen::Vector3d(1.0, -0.5, 2.0);
  const EnergyGradient e0 = gaussian(s.q);
  s.energy = e0.energy;
  s.gradient = e0.gradient;
  const Eigen::VectorXd xi = Eigen::Vector3d(3.0, 3.0, 3.0);
  MalaState copy = s;
  CHECK_FALSE(mala_step(copy, gaussian, 0.5, xi, 1.0 - 1e-16));
  CHECK(copy.q == s.q);
  CHECK(mala_step(copy, gaussian, 0.5, xi, 0.0 + 1e-300));

  auto broken = [](const Eigen::VectorXd& q) {
    return EnergyGradient{std::numeric_limits<double>::quiet_NaN(), q};
  };
  bool flagged = false;
  MalaState b = s;
  CHECK_FALSE(mala_step(b, broken, 0.1, xi, 0.5, &flagged));
  CHECK(flagged);
  CHECK(b.q == s.q);
}

TEST_CASE("MALA leaves the standard Gaussian invariant") {
  std::mt19937_64 rng(17);
  MalaState s;
  s.q = Eigen::Vector3d(2.0, -2.0, 0.5);
  EnergyGradient e = gaussian(s.q);
  s.energy = e.energy;
  s.gradient = e.gradient;
  const int batches = 400, per_batch = 1000;
  Eigen::MatrixXd batch_means(batches, 3);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero();
  for (int k = 0; k < 2000; ++k) mala_step(s, gaussian, 0.4, rng);
  for (int b = 0; b < batches; ++b) {
    Eigen::Vector3d m = Eigen::Vector3d::Zero();
    for (int k = 0; k < per_batch; ++k) {
      mala_step(s, gaussian, 0.4, rng);
      m += s.q;
      sum += s.q;
      sq += s.q.cwiseProduct(s.q);
    }
    batch_means.row(b) = (m / per_batch).transpose();
  }
  const double n = static_cast<double>(batches) * per_batch;
  for (int d = 0; d < 3; ++d) {
    const double mean = sum[d] / n;
    const Eigen::ArrayXd col = batch_means.col(d).array();
    const double se = std::sqrt((col - col.mean()).square().sum() / (batches - 1)) / std::sqrt(double(batches));
    CHECK(std::abs(mean) <= 3.0 * se);
    CHECK(std::abs(sq[d] / n - mean * mean - 1.0) <= 0.05);
  }
}

TEST_CASE("acceptance decreases with the step size") {
  const ChainSpec s = chain(Potential::quartic_paper(), 8, 2.0);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    double previous = 2.0;
    for (double h : {0.01, 0.05, 0.2}) {
      MalaConfig c = small(seed, 2);
      c.stages = 1;
      c.adapt = false;
      c.step = h;
      const FreeEnergyEstimate e = staged_fep(s, c);
      CHECK(e.stage_acceptance[0] < previous);
      previous = e.stage_acceptance[0];
    }
  }
}

TEST_CASE("estimates are deterministic and independent of the worker count") {
  const ChainSpec s = chain(Potential::quartic_paper(), 3, 2.0);
  MalaConfig a = small(42);
  MalaConfig b = a;
  b.workers = 1;
  const FreeEnergyEstimate x = estimate_G_N(s, a), y = estimate_G_N(s, a), z = estimate_G_N(s, b);
  CHECK(x.value == y.value);
  CHECK(x.std_error == y.std_error);
  CHECK(x.replica_values == y.replica_values);
  CHECK(x.stage_acceptance == y.stage_acceptance);
  CHECK(x.replica_values == z.replica_values);
  CHECK(x.config_hash == y.config_hash);
  MalaConfig other = a;
  other.seed = 43;
  CHECK(provenance_hash(s, other) != x.config_hash);
}

TEST_CASE("replica streams do not depend on the replica count") {
  const ChainSpec s = chain(Potential::harmonic(1.0), 2, 1.0);
  const FreeEnergyEstimate four = staged_fep(s, small(5, 4)), eight = staged_fep(s, small(5, 8));
  for (std::size_t r = 0; r < 4; ++r) CHECK(four.replica_values[r] == eight.replica_values[r]);
  CHECK(replica_seed(5, 0) != replica_seed(5, 1));
  CHECK(replica_seed(5, 0) != replica_seed(6, 0));
}

TEST_CASE("estimate fields") {
  const ChainSpec s = chain(Potential::harmonic(1.0), 4, 1.0);
  const FreeEnergyEstimate e = estimate_G_N(s, small(8));
  CHECK(e.replicas == 8);
  CHECK(e.std_error >= 0.0);
  CHECK(e.total_samples == 8u * 10u * 1600u);
  CHECK(e.stage_acceptance.size() == 10);
  for (double a : e.stage_acceptance) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
  CHECK(e.seed == 8);
}

TEST_CASE("standard error shrinks like one over root replicas") {
  const ChainSpec s = chain(Potential::harmonic(1.0), 2, 1.0);
  const FreeEnergyEstimate a = staged_fep(s, small(9, 16)), b = staged_fep(s, small(9, 64));
  const double ratio = b.std_error / a.std_error;
  CHECK(ratio >= 0.35);
  CHECK(ratio <= 0.7);
}

TEST_CASE("sampled G_N agrees with the quadrature oracle") {
  for (std::size_t N : {2u, 3u, 4u}) {
    for (bool quartic : {false, true}) {
      const ChainSpec s = quartic ? chain(Potential::quartic_paper(), N, 2.0) : chain(Potential::harmonic(1.0), N, 1.0);
      MalaConfig c = small(100 + N, 16);
      c.stages = 40;
      c.steps_per_stage = 10000;
      const FreeEnergyEstimate e = estimate_G_N(s, c);
      const double exact = dense_G_N(s, {1e-9, 1e-11, 12.0, 4000});
      INFO("N=", N, " quartic=", quartic, " z=", (e.value - exact) / e.std_error);
      CHECK(std::abs(e.value - exact) <= 3.0 * e.std_error);
    }
  }
}

TEST_CASE("sampler configuration errors") {
  const ChainSpec s = chain(Potential::harmonic(1.0), 2, 1.0);
  MalaConfig c = small(1);
  c.step = 0.0;
  CHECK_THROWS_AS(staged_fep(s, c), InvalidInput);
  c = small(1);
  c.replicas = 1;
  CHECK_THROWS_AS(staged_fep(s, c), InvalidInput);
  c = small(1);
  c.burn_in = 1.0;
  CHECK_THROWS_AS(staged_fep(s, c), InvalidInput);
  c = small(1);
  c.target_lo = 0.8;
  CHECK_THROWS_AS(staged_fep(s, c), InvalidInput);
}
