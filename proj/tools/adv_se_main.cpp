#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "advse/presets.hpp"
#include "advse/runner.hpp"

namespace {

// 0 success, 1 partial row failures, 2 usage error, 3 fatal IO.
enum ExitCode { kOk = 0, kPartial = 1, kUsage = 2, kIo = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State evolution and finite-size experiments for adversarially "
               "trained linear classifiers on block feature models"};
  app.require_subcommand(1);

  std::string preset, config_path, alpha_grid, eps_t_grid, out_path;
  std::string format = "csv";
  double eps_g = -1.0, lambda = -1.0, tau = -1.0, gamma = 0.0;
  double lt1 = 0.0, lt2 = 0.0;
  int d = -1, seeds = -1, jobs = 0;

  std::vector<CLI::App*> subs;
  for (const char* m : {"se", "asymptotic", "simulate", "compare", "surrogate",
                        "fgm"}) {
    CLI::App* sub = app.add_subcommand(m);
    sub->add_option("--preset", preset, "named parameter preset");
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--alpha", alpha_grid,
                    "sample complexity grid: comma list or log:lo:hi:count");
    sub->add_option("--eps-t", eps_t_grid, "training attack strength grid");
    sub->add_option("--eps-g", eps_g, "test attack strength");
    sub->add_option("--lambda", lambda,
                    "ridge strength (lambda_1 in asymptotic mode)");
    sub->add_option("--tau", tau, "probit noise");
    sub->add_option("--d", d, "simulation dimension");
    sub->add_option("--seeds", seeds, "simulation seeds");
    sub->add_option("--gamma", gamma, "class-preserving teacher margin");
    sub->add_option("--lt1", lt1, "surrogate sqrt-penalty strength");
    sub->add_option("--lt2", lt2, "surrogate quadratic penalty strength");
    sub->add_option("--out", out_path, "output path (default stdout)");
    sub->add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--jobs", jobs, "parallel rows (default: cores)");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kOk : kUsage;
  }

  advse::ExperimentConfig config;
  try {
    if (!config_path.empty()) config = advse::load_config_file(config_path);
    config.mode = advse::mode_from_name(app.get_subcommands().front()->get_name());
    if (!preset.empty()) {
      if (!advse::has_preset(preset)) {
        std::cerr << "unknown preset: " << preset << "\n";
        return kUsage;
      }
      const advse::Preset& p = advse::preset_by_name(preset);
      config.preset = p.name;
      config.blocks = p.blocks;
      config.power_law = p.power_law;
      config.eps_g = p.eps_g;
      config.lambda = p.lambda;
      config.tau = p.tau;
    }
    if (config.preset.empty() && config.blocks.empty()) {
      std::cerr << "need --preset or --config with a model\n";
      return kUsage;
    }
    if (!alpha_grid.empty()) config.alphas = advse::parse_grid(alpha_grid);
    if (!eps_t_grid.empty()) config.eps_ts = advse::parse_grid(eps_t_grid);
    if (eps_g >= 0.0) config.eps_g = eps_g;
    if (lambda >= 0.0) config.lambda = lambda;
    if (tau >= 0.0) config.tau = tau;
    if (d > 0) config.d = d;
    if (seeds > 0) config.seeds = seeds;
    config.gamma = gamma;
    if (lt1 > 0.0) config.lt1 = lt1;
    if (lt2 > 0.0) config.lt2 = lt2;
    config.jobs = jobs;
    if (const char* env = std::getenv("ADV_SE_SEED"))
      config.base_seed = std::strtoull(env, nullptr, 10);
    if (config.alphas.empty() || config.eps_ts.empty()) {
      std::cerr << "empty parameter grid\n";
      return kUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  std::vector<advse::ResultRow> rows;
  try {
    rows = advse::run(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (out_path.empty()) {
      std::cout << advse::rows_to_csv(rows);
    } else if (format == "json") {
      advse::write_json(rows, out_path);
    } else {
      advse::write_csv(rows, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  }

  std::size_t failed = 0;
  for (const auto& r : rows) failed += !r.error.empty();
  if (failed == rows.size() && !rows.empty()) return kUsage;
  return failed > 0 ? kPartial : kOk;
}
