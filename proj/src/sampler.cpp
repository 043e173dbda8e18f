#include "defectfe/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "defectfe/errors.hpp"

namespace defectfe {

void MalaConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidInput("sampler.step must be positive");
  if (replicas < 2) throw InvalidInput("sampler.replicas must be at least 2");
  if (stages < 1) throw InvalidInput("sampler.stages must be at least 1");
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw InvalidInput("sampler.burn_in must lie in [0, 1)");
  if (steps_per_stage <= burn_in_steps()) throw InvalidInput("sampler: no samples left after burn-in");
  if (adapt && !(target_lo > 0.0 && target_lo < target_hi && target_hi < 1.0)) {
    throw InvalidInput("sampler: adaptation targets must satisfy 0 < lo < hi < 1");
  }
}

std::size_t MalaConfig::burn_in_steps() const {
  return static_cast<std::size_t>(burn_in * static_cast<double>(steps_per_stage));
}

namespace {

void check_dimension(const ChainSpec& spec, const Eigen::VectorXd& u) {
  if (static_cast<std::size_t>(u.size()) + 1 != spec.N) {
    throw InvalidInput("state has " + std::to_string(u.size()) + " entries, expected N - 1 = " +
                       std::to_string(spec.N - 1));
  }
}

// Bond i (1-based) of the interior configuration u.
double bond_length(const ChainSpec& spec, const Eigen::VectorXd& u, std::size_t i) {
  const auto d = static_cast<std::size_t>(u.size());
  const double right = i <= d ? u[static_cast<Eigen::Index>(i - 1)] : static_cast<double>(spec.N) * spec.A;
  const double left = i >= 2 ? u[static_cast<Eigen::Index>(i - 2)] : 0.0;
  return right - left;
}

struct ReplicaResult {
  double value = 0.0;
  std::vector<double> acceptance;
  std::size_t samples = 0;
  std::size_t nonfinite = 0;
};

ReplicaResult run_replica(const ChainSpec& spec, const MalaConfig& cfg, std::uint64_t replica) {
  std::mt19937_64 rng(replica_seed(cfg.seed, replica));
  const std::size_t d = spec.N - 1;
  const std::size_t burn = cfg.burn_in_steps();
  const double dlambda = 1.0 / static_cast<double>(cfg.stages);

  MalaState s;
  s.q.resize(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) s.q[static_cast<Eigen::Index>(i)] = static_cast<double>(i + 1) * spec.A;

  ReplicaResult out;
  out.acceptance.reserve(cfg.stages);
  double h = cfg.step;
  for (std::size_t stage = 0; stage < cfg.stages; ++stage) {
    const double lambda = static_cast<double>(stage) * dlambda;
    auto oracle = [&](const Eigen::VectorXd& q) { return chain_energy_and_gradient(spec, q, lambda); };
    EnergyGradient eg = oracle(s.q);
    s.energy = eg.energy;
    s.gradient = std::move(eg.gradient);

    std::size_t window_accepts = 0, window = 0, accepted = 0;
    double m = -std::numeric_limits<double>::infinity(), sum = 0.0;
    for (std::size_t step = 0; step < cfg.steps_per_stage; ++step) {
      bool bad = false;
      const bool ok = mala_step(s, oracle, h, rng, &bad);
      if (bad) ++out.nonfinite;
      if (step < burn) {
        if (cfg.adapt) {
          window_accepts += ok;
          if (++window == 50) {
            const double rate = static_cast<double>(window_accepts) / 50.0;
            if (rate < cfg.target_lo) h *= 0.9;
            if (rate > cfg.target_hi) h *= 1.1;
            h = std::clamp(h, 1e-8, 1e2);
            window = window_accepts = 0;
          }
        }
        continue;
      }
      accepted += ok;
      const double a = -dlambda * chain_perturbation(spec, s.q);
      if (a > m) {
        sum = sum * std::exp(m - a) + 1.0;
        m = a;
      } else {
        sum += std::exp(a - m);
      }
    }
    const auto kept = static_cast<double>(cfg.steps_per_stage - burn);
    out.value += -(m + std::log(sum / kept));
    out.acceptance.push_back(static_cast<double>(accepted) / kept);
    out.samples += cfg.steps_per_stage - burn;
  }
  return out;
}

void hash_bytes(std::uint64_t& h, const std::string& text) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EnergyGradient chain_energy_and_gradient(const ChainSpec& spec, const Eigen::VectorXd& u, double lambda) {
  check_dimension(spec, u);
  const std::size_t N = spec.N;
  EnergyGradient out;
  out.gradient = Eigen::VectorXd::Zero(u.size());
  for (std::size_t i = 1; i <= N; ++i) {
    const double y = bond_length(spec, u, i);
    Jet b = spec.psi.eval(y);
    const double h = spec.forces.at(i);
    double slope = b.d1 + lambda * h;
    out.energy += b.value + lambda * h * y;
    if (i == 1 && !spec.defect.absent()) {
      const Jet p = spec.defect.potential.eval(y);
      out.energy += lambda * p.value;
      slope += lambda * p.d1;
    }
    // y_i = u_i - u_{i-1}
    if (i <= N - 1) out.gradient[static_cast<Eigen::Index>(i - 1)] += slope;
    if (i >= 2) out.gradient[static_cast<Eigen::Index>(i - 2)] -= slope;
  }
  return out;
}

double chain_perturbation(const ChainSpec& spec, const Eigen::VectorXd& u) {
  check_dimension(spec, u);
  double dv = spec.defect.absent() ? 0.0 : spec.defect.value(bond_length(spec, u, 1));
  if (spec.has_forces()) {
    for (std::size_t i = 1; i <= spec.N; ++i) dv += spec.forces.at(i) * bond_length(spec, u, i);
  }
  return dv;
}

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) {
  // splitmix64 over master + replica * golden gamma
  std::uint64_t z = master + (replica + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

FreeEnergyEstimate staged_fep(const ChainSpec& spec, const MalaConfig& cfg) {
  spec.validate();
  cfg.validate();
  std::vector<ReplicaResult> results(cfg.replicas);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t r; !failed && (r = next++) < cfg.replicas;) {
      try {
        results[r] = run_replica(spec, cfg, r);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  unsigned width = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  width = static_cast<unsigned>(std::min<std::size_t>(width, cfg.replicas));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < width; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  FreeEnergyEstimate est;
  est.replicas = cfg.replicas;
  est.seed = cfg.seed;
  est.stage_acceptance.assign(cfg.stages, 0.0);
  for (const ReplicaResult& r : results) {
    est.replica_values.push_back(r.value);
    est.total_samples += r.samples;
    est.rejected_nonfinite += r.nonfinite;
    for (std::size_t k = 0; k < cfg.stages; ++k) est.stage_acceptance[k] += r.acceptance[k];
  }
  const auto R = static_cast<double>(cfg.replicas);
  for (double& a : est.stage_acceptance) a /= R;
  double mean = 0.0;
  for (double v : est.replica_values) mean += v;
  mean /= R;
  double ss = 0.0;
  for (double v : est.replica_values) ss += (v - mean) * (v - mean);
  est.value = mean;
  est.std_error = std::sqrt(ss / (R - 1.0)) / std::sqrt(R);
  return est;
}

std::uint64_t provenance_hash(const ChainSpec& spec, const MalaConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::string text = "N=" + std::to_string(spec.N) + ";A=" + fmt(spec.A) + ";psi=";
  for (double c : spec.psi.coefficients()) text += fmt(c) + ",";
  text += ";P=";
  for (double c : spec.defect.potential.coefficients()) text += fmt(c) + ",";
  text += ";h=";
  for (double v : spec.forces.entries()) text += fmt(v) + ",";
  text += ";step=" + fmt(cfg.step) + ";steps=" + std::to_string(cfg.steps_per_stage) + ";burn=" + fmt(cfg.burn_in) +
          ";seed=" + std::to_string(cfg.seed) + ";replicas=" + std::to_string(cfg.replicas) +
          ";stages=" + std::to_string(cfg.stages) + ";adapt=" + (cfg.adapt ? "1" : "0") + ";targets=" +
          fmt(cfg.target_lo) + "," + fmt(cfg.target_hi);
  hash_bytes(h, text);
  return h;
}

FreeEnergyEstimate estimate_G_N(const ChainSpec& spec, const MalaConfig& cfg) {
  FreeEnergyEstimate est = staged_fep(spec, cfg);
  est.config_hash = provenance_hash(spec, cfg);
  return est;
}

}  // namespace defectfe
