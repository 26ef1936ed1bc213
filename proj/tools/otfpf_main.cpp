#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "otfpf/cli_io.hpp"
#include "otfpf/errors.hpp"
#include "otfpf/kalman.hpp"

namespace fs = std::filesystem;
using namespace otfpf;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<uint64_t> seed_flag;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config) {
  auto* c = cmd->add_option("--config", opts.config_path,
                            "JSON experiment configuration");
  if (needs_config) c->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option_function<uint64_t>(
      "--seed", [&opts](uint64_t v) { opts.seed_flag = v; },
      "master seed (overrides config and OTFPF_SEED)");
  cmd->add_option("--threads", opts.threads,
                  "worker threads, 0 = auto; never affects results");
}

// Seed precedence: --seed flag > OTFPF_SEED env > config value.
ExperimentConfig load_config(const CommonOpts& opts) {
  ExperimentConfig cfg = parse_config(opts.config_path);
  if (const char* env = std::getenv("OTFPF_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw ConfigError("OTFPF_SEED: not an unsigned integer");
    cfg.master_seed = v;
  }
  if (opts.seed_flag) cfg.master_seed = *opts.seed_flag;
  return cfg;
}

class OutputDir {
 public:
  OutputDir(const CommonOpts& opts, const ExperimentConfig& cfg)
      : dir_(opts.out_dir), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
    manifest_.config_hash = config_hash(cfg);
    manifest_.master_seed = cfg.master_seed;
  }

  std::ofstream open(const std::string& name) {
    manifest_.outputs.push_back(name);
    std::ofstream os(dir_ / name);
    if (!os) throw ConfigError("--out: cannot write to " + (dir_ / name).string());
    return os;
  }

  void finish() {
    manifest_.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    write_manifest(dir_, manifest_);
  }

 private:
  fs::path dir_;
  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

int run(int argc, char** argv) {
  CLI::App app{"Controlled interacting particle filters for the "
               "linear-Gaussian filtering problem"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonOpts opts;
  auto* validate = app.add_subcommand(
      "validate", "matrix-equation and invariant self-checks");
  add_common(validate, opts, /*needs_config=*/false);
  auto* filter = app.add_subcommand(
      "filter", "error decay of a finite-N filter against the exact one");
  add_common(filter, opts, true);
  auto* chaos = app.add_subcommand(
      "chaos", "propagation-of-chaos scaling of the coupled pair");
  add_common(chaos, opts, true);
  auto* static_cmp = app.add_subcommand(
      "static-compare", "importance sampling vs feedback control MSE");
  add_common(static_cmp, opts, true);
  auto* sweep = app.add_subcommand(
      "sweep", "(N, d) grid of the static comparison with level sets");
  add_common(sweep, opts, true);

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    return run_self_checks(std::cout) ? 0 : 3;
  }

  const ExperimentConfig cfg = load_config(opts);
  OutputDir out(opts, cfg);

  if (filter->parsed()) {
    const DecayResult res = run_error_decay(cfg, opts.threads);
    {
      auto os = out.open("trajectory.csv");
      write_trajectory_csv(os, res.trajectory);
    }
    {
      auto os = out.open("path.csv");
      write_path_csv(os, res.trajectory.path, cfg.dt);
    }
    std::cout << "fitted tail decay rates (median over " << cfg.trials
              << " trials): mean " << fmt17(res.median_mean_rate) << ", cov "
              << fmt17(res.median_cov_rate) << "\n";
    try {
      const SteadyState ss = solve_are(*cfg.model);
      std::cout << "lambda0 " << fmt17(ss.lambda0) << "\n";
    } catch (const AREDivergence&) {
      std::cout << "lambda0 n/a (ARE did not converge)\n";
    }
  } else if (chaos->parsed()) {
    const ChaosResult res = run_chaos(cfg, opts.threads);
    auto os = out.open("chaos.csv");
    write_chaos_csv(os, res);
    std::cout << "log-log slopes vs N: err2 " << fmt17(res.slope_err2)
              << ", cor1 " << fmt17(res.slope_cor1) << "\n";
  } else if (static_cmp->parsed()) {
    const std::vector<MseRecord> records = run_static_compare(cfg, opts.threads);
    auto os = out.open("mse.csv");
    write_mse_csv(os, records);
  } else if (sweep->parsed()) {
    const SweepResult res = run_sweep(cfg, opts.threads);
    {
      auto os = out.open("mse.csv");
      write_mse_csv(os, res.records);
    }
    {
      auto os = out.open("levels.csv");
      write_levels_csv(os, res.levels);
    }
    std::cout << "level-set growth: PF log N* vs d slope "
              << fmt17(res.pf_logn_vs_d_slope) << ", FPF log N* vs log d slope "
              << fmt17(res.fpf_logn_vs_logd_slope) << "\n";
  }

  out.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
