#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "defectfe/errors.hpp"
#include "defectfe/run.hpp"

namespace {

unsigned env_workers() {
  const char* v = std::getenv("DEFECTFE_WORKERS");
  if (!v || !*v) return 0;
  try {
    const long n = std::stol(v);
    if (n < 1) throw defectfe::InvalidInput("DEFECTFE_WORKERS must be a positive integer");
    return static_cast<unsigned>(n);
  } catch (const std::logic_error&) {
    throw defectfe::InvalidInput("DEFECTFE_WORKERS must be a positive integer");
  }
}

std::filesystem::path output_path(const std::string& flag, const defectfe::RunConfig& cfg) {
  std::filesystem::path p = !flag.empty() ? flag : !cfg.output.empty() ? cfg.output : to_string(cfg.selector) + ".csv";
  if (p.is_relative()) {
    if (const char* dir = std::getenv("DEFECTFE_OUT_DIR"); dir && *dir) p = std::filesystem::path(dir) / p;
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Defect-formation free energy of a 1D atomistic chain"};
  std::string selector, config, out;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  bool desk = false;
  app.add_option("selector", selector, "gn-sample | gn-dense | gncg | ginf | convergence | check | cb-table")
      ->required();
  app.add_option("--config", config, "run configuration (JSON)")->required();
  app.add_option("--out", out, "output CSV path");
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--desk", desk, "apply the config's reduced-scale overrides");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    defectfe::RunConfig cfg = defectfe::load_config(config, desk);
    cfg.selector = defectfe::parse_selector(selector);
    if (seed_opt->count()) cfg.seed = seed;
    if (workers == 0) workers = env_workers();
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());

    const defectfe::RunResult res = defectfe::run(cfg, workers);
    const auto path = output_path(out, cfg);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw defectfe::InvalidInput("output: cannot write '" + path.string() + "'");
    f << res.csv;
    f.close();
    if (!f) throw defectfe::NumericalFailure("output: write to '" + path.string() + "' failed");
    std::cout << res.summary << "-> " << path.string() << '\n';
    return 0;
  } catch (const defectfe::InvalidInput& e) {
    std::cerr << "defectfe: config error: " << e.what() << '\n';
    return 2;
  } catch (const defectfe::NumericalFailure& e) {
    std::cerr << "defectfe: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "defectfe: error: " << e.what() << '\n';
    return 3;
  }
}
