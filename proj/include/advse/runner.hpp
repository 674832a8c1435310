#pragma once

#include <optional>
#include <string>
#include <vector>

#include "advse/bfm.hpp"
#include "advse/se.hpp"

namespace advse {

enum class Mode { kSe, kAsymptotic, kSimulate, kCompare, kSurrogate, kFgm };

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct ExperimentConfig {
  Mode mode = Mode::kSe;
  std::string preset;  // empty when the model is given explicitly
  std::vector<Block> blocks;
  std::optional<PowerLaw> power_law;
  std::vector<double> alphas{1.0};
  std::vector<double> eps_ts{0.0};
  double eps_g = 0.2;
  double lambda = 1e-3;
  double tau = 0.05;
  int d = 1000;
  int seeds = 20;
  std::uint64_t base_seed = 42;
  double gamma = 0.0;  // class-preserving teacher margin
  double lt1 = 0.0, lt2 = 0.0;  // surrogate penalties
  int jobs = 0;  // 0 = hardware concurrency

  BlockFeatureModel model() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
};

// One output row. Missing values stay unset and serialise as empty CSV
// cells / JSON nulls.
struct ResultRow {
  std::string preset;
  std::string provenance;  // "theory" | "simulation"
  double alpha = 0.0, lambda = 0.0, tau = 0.0, eps_t = 0.0, eps_g = 0.0;
  int d = 0;
  int seeds = 0;
  std::optional<double> m, q, v, p, a, f, n, rho;
  std::optional<double> egen, ebnd, eadv, etrain, ltrain, ecp;
  std::optional<double> m_sem, q_sem, p_sem, a_sem, f_sem, n_sem;
  std::optional<double> egen_sem, ebnd_sem, eadv_sem, etrain_sem, ltrain_sem,
      ecp_sem;
  std::optional<double> z_egen, z_ebnd, z_eadv, z_etrain;
  std::optional<int> iterations;
  std::optional<double> residual;
  std::string error;  // nonempty when this row failed
};

// Column order of the CSV header; documented in the README.
const std::vector<std::string>& result_columns();

// Parses flag-style values.
std::vector<double> parse_grid(const std::string& text);

ExperimentConfig load_config_file(const std::string& path);

// Executes the experiment. Solver failures are recorded per row and do not
// abort the run.
std::vector<ResultRow> run(const ExperimentConfig& config);

void write_csv(const std::vector<ResultRow>& rows, const std::string& path);
void write_json(const std::vector<ResultRow>& rows, const std::string& path);
std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> rows_from_csv(const std::string& text);

}  // namespace advse
