#include "advse/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "advse/asymptotics.hpp"
#include "advse/gamp.hpp"
#include "advse/metrics.hpp"
#include "advse/presets.hpp"
#include "advse/sim.hpp"
#include "json.hpp"

namespace advse {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string cell(const std::optional<double>& x) {
  return x ? fmt(*x) : std::string();
}

void json_put(nlohmann::json& j, const char* key,
              const std::optional<double>& x) {
  if (x)
    j[key] = *x;
  else
    j[key] = nullptr;
}

std::optional<double> parse_cell(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

// Aggregates per-seed samples into mean and standard error of the mean.
struct Stat {
  double sum = 0.0, sumsq = 0.0;
  int count = 0;
  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++count;
  }
  double mean() const { return sum / count; }
  double sem() const {
    if (count < 2) return 0.0;
    const double var = (sumsq - sum * sum / count) / (count - 1);
    return std::sqrt(std::max(var, 0.0) / count);
  }
};

struct SimAggregate {
  Stat m, q, p, a, f, n;
  Stat egen, ebnd, eadv, etrain, ltrain, ecp;
};

int test_size_for(int d) {
  (void)d;  // field-level test sampling makes the cost d-independent
  return 1000000;
}

// Trains one seed of the configured simulation method and accumulates
// overlaps and empirical errors.
void run_one_seed(const ExperimentConfig& config, const BlockFeatureModel& model,
                  Mode mode, double alpha, double eps_t, std::uint64_t seed,
                  SimAggregate& agg) {
  const Dataset data = sample_dataset(model, config.d, alpha, config.tau, seed);
  TrainerConfig tcfg;
  tcfg.init_seed = seed + 7777;
  Estimator est;
  switch (mode) {
    case Mode::kFgm:
      est = fgm_train(data, config.lambda, eps_t, tcfg);
      break;
    case Mode::kSurrogate:
      est = surrogate_train(data, config.lambda, config.lt1, config.lt2, tcfg);
      break;
    default:
      est = erm_train(data, config.lambda, eps_t, tcfg);
      break;
  }
  const EmpiricalOverlaps ov = empirical_overlaps(est, data.theta0, model);
  const EmpiricalErrors err =
      empirical_errors(est, data.theta0, model, config.tau, config.eps_g,
                       test_size_for(config.d), seed + 31337, config.gamma);
  const TrainSetMetrics tm = training_metrics(est, data, eps_t);
  agg.m.add(ov.m);
  agg.q.add(ov.q);
  agg.p.add(ov.p);
  agg.a.add(ov.a);
  agg.f.add(ov.f);
  agg.n.add(ov.n);
  agg.egen.add(err.egen);
  agg.ebnd.add(err.ebnd);
  agg.eadv.add(err.eadv);
  agg.ecp.add(err.ecp);
  agg.etrain.add(tm.etrain);
  agg.ltrain.add(tm.ltrain);
}

ResultRow theory_row(const ExperimentConfig& config,
                     const BlockFeatureModel& model, double alpha,
                     double eps_t) {
  ResultRow row;
  row.preset = config.preset;
  row.provenance = "theory";
  row.alpha = alpha;
  row.lambda = config.lambda;
  row.tau = config.tau;
  row.eps_t = eps_t;
  row.eps_g = config.eps_g;
  row.d = 0;
  row.seeds = 0;
  ExperimentParams params{alpha, config.lambda, config.tau, eps_t,
                          config.eps_g};
  const FixedPoint fp = solve_fixed_point(params, model);
  row.m = fp.ov.m;
  row.q = fp.ov.q;
  row.v = fp.ov.v;
  row.p = fp.ov.p;
  row.a = fp.aux.a;
  row.f = fp.aux.f;
  row.n = fp.aux.n;
  row.rho = fp.aux.rho;
  const ErrorReport rep = theory_errors(fp.ov, fp.aux, params, config.gamma);
  row.egen = rep.egen;
  row.ebnd = rep.ebnd;
  row.eadv = rep.eadv;
  row.etrain = rep.etrain;
  row.ltrain = rep.ltrain;
  row.ecp = rep.ecp;
  row.iterations = fp.iterations;
  row.residual = fp.residual;
  return row;
}

ResultRow asymptotic_row(const ExperimentConfig& config,
                         const BlockFeatureModel& model, double eps_t) {
  ResultRow row;
  row.preset = config.preset;
  row.provenance = "theory";
  row.alpha = std::numeric_limits<double>::infinity();
  row.lambda = config.lambda;
  row.tau = config.tau;
  row.eps_t = eps_t;
  row.eps_g = config.eps_g;
  const LargeAlphaSolution sol =
      solve_large_alpha(config.lambda, config.tau, eps_t, model);
  const PlateauReport rep = plateau_errors(sol, model, config.tau, config.eps_g);
  row.m = sol.state.m0;
  row.q = sol.state.q0;
  row.v = sol.state.v0;
  row.p = sol.state.p0;
  row.a = sol.aux.a;
  row.f = sol.aux.f;
  row.n = sol.aux.n;
  row.rho = sol.aux.rho;
  row.egen = rep.egen_inf;
  row.ebnd = rep.ebnd_inf;
  row.eadv = rep.eadv_inf;
  row.iterations = sol.iterations;
  row.residual = sol.residual;
  return row;
}

ResultRow simulation_row(const ExperimentConfig& config,
                         const BlockFeatureModel& model, Mode mode,
                         double alpha, double eps_t, std::uint64_t row_seed) {
  ResultRow row;
  row.preset = config.preset;
  row.provenance = "simulation";
  row.alpha = alpha;
  row.lambda = config.lambda;
  row.tau = config.tau;
  row.eps_t = eps_t;
  row.eps_g = config.eps_g;
  row.d = config.d;
  row.seeds = config.seeds;
  SimAggregate agg;
  for (int s = 0; s < config.seeds; ++s)
    run_one_seed(config, model, mode, alpha, eps_t, row_seed + 1000003ULL * s,
                 agg);
  row.m = agg.m.mean();
  row.q = agg.q.mean();
  row.p = agg.p.mean();
  row.a = agg.a.mean();
  row.f = agg.f.mean();
  row.n = agg.n.mean();
  row.rho = model.rho();
  row.egen = agg.egen.mean();
  row.ebnd = agg.ebnd.mean();
  row.eadv = agg.eadv.mean();
  row.etrain = agg.etrain.mean();
  row.ltrain = agg.ltrain.mean();
  row.ecp = agg.ecp.mean();
  row.m_sem = agg.m.sem();
  row.q_sem = agg.q.sem();
  row.p_sem = agg.p.sem();
  row.a_sem = agg.a.sem();
  row.f_sem = agg.f.sem();
  row.n_sem = agg.n.sem();
  row.egen_sem = agg.egen.sem();
  row.ebnd_sem = agg.ebnd.sem();
  row.eadv_sem = agg.eadv.sem();
  row.etrain_sem = agg.etrain.sem();
  row.ltrain_sem = agg.ltrain.sem();
  row.ecp_sem = agg.ecp.sem();
  return row;
}

void parallel_tasks(int jobs, int count,
                    const std::function<void(int)>& task) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) task(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kSe: return "se";
    case Mode::kAsymptotic: return "asymptotic";
    case Mode::kSimulate: return "simulate";
    case Mode::kCompare: return "compare";
    case Mode::kSurrogate: return "surrogate";
    case Mode::kFgm: return "fgm";
  }
  return "se";
}

Mode mode_from_name(const std::string& name) {
  if (name == "se") return Mode::kSe;
  if (name == "asymptotic") return Mode::kAsymptotic;
  if (name == "simulate") return Mode::kSimulate;
  if (name == "compare") return Mode::kCompare;
  if (name == "surrogate") return Mode::kSurrogate;
  if (name == "fgm") return Mode::kFgm;
  throw std::invalid_argument("unknown mode: " + name);
}

BlockFeatureModel ExperimentConfig::model() const {
  if (!preset.empty() && blocks.empty()) {
    const Preset& p = preset_by_name(preset);
    return p.model();
  }
  return build_bfm(blocks, power_law);
}

std::string ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["mode"] = mode_name(mode);
  j["preset"] = preset;
  j["blocks"] = nlohmann::json::array();
  for (const Block& b : blocks)
    j["blocks"].push_back({{"phi", b.fraction},
                           {"psi", b.psi},
                           {"delta", b.delta},
                           {"upsilon", b.upsilon},
                           {"t", b.t}});
  if (power_law)
    j["power_law"] = {{"beta", power_law->beta}, {"modes", power_law->modes}};
  else
    j["power_law"] = nullptr;
  j["alpha"] = alphas;
  j["eps_t"] = eps_ts;
  j["eps_g"] = eps_g;
  j["lambda"] = lambda;
  j["tau"] = tau;
  j["d"] = d;
  j["seeds"] = seeds;
  j["base_seed"] = base_seed;
  j["gamma"] = gamma;
  j["lt1"] = lt1;
  j["lt2"] = lt2;
  j["jobs"] = jobs;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ExperimentConfig c;
  c.mode = mode_from_name(j.at("mode").get<std::string>());
  c.preset = j.value("preset", std::string());
  if (j.contains("blocks"))
    for (const auto& jb : j.at("blocks"))
      c.blocks.push_back({jb.at("phi").get<double>(),
                          jb.at("psi").get<double>(),
                          jb.at("delta").get<double>(),
                          jb.at("upsilon").get<double>(),
                          jb.at("t").get<double>()});
  if (j.contains("power_law") && !j.at("power_law").is_null())
    c.power_law = PowerLaw{j.at("power_law").at("beta").get<double>(),
                           j.at("power_law").at("modes").get<int>()};
  if (j.contains("alpha")) c.alphas = j.at("alpha").get<std::vector<double>>();
  if (j.contains("eps_t")) c.eps_ts = j.at("eps_t").get<std::vector<double>>();
  c.eps_g = j.value("eps_g", c.eps_g);
  c.lambda = j.value("lambda", c.lambda);
  c.tau = j.value("tau", c.tau);
  c.d = j.value("d", c.d);
  c.seeds = j.value("seeds", c.seeds);
  c.base_seed = j.value("base_seed", c.base_seed);
  c.gamma = j.value("gamma", c.gamma);
  c.lt1 = j.value("lt1", c.lt1);
  c.lt2 = j.value("lt2", c.lt2);
  c.jobs = j.value("jobs", c.jobs);
  if (c.alphas.empty()) throw std::invalid_argument("config: empty alpha grid");
  if (c.eps_ts.empty()) throw std::invalid_argument("config: empty eps_t grid");
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ExperimentConfig::from_json(ss.str());
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.rfind("log:", 0) == 0) {
    // log:lo:hi:count
    double lo = 0.0, hi = 0.0;
    int count = 0;
    if (std::sscanf(text.c_str(), "log:%lf:%lf:%d", &lo, &hi, &count) != 3 ||
        count < 1 || lo <= 0.0 || hi <= 0.0)
      throw std::invalid_argument("bad grid: " + text);
    if (count == 1) return {lo};
    const double step = std::log(hi / lo) / (count - 1);
    for (int i = 0; i < count; ++i) out.push_back(lo * std::exp(step * i));
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  if (out.empty()) throw std::invalid_argument("bad grid: " + text);
  return out;
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "preset",     "provenance", "alpha",      "lambda",     "tau",
      "eps_t",      "eps_g",      "d",          "seeds",      "m",
      "q",          "V",          "P",          "A",          "F",
      "N",          "rho",        "egen",       "ebnd",       "eadv",
      "etrain",     "ltrain",     "ecp",        "m_sem",      "q_sem",
      "P_sem",      "A_sem",      "F_sem",      "N_sem",      "egen_sem",
      "ebnd_sem",   "eadv_sem",   "etrain_sem", "ltrain_sem", "ecp_sem",
      "z_egen",     "z_ebnd",     "z_eadv",     "z_etrain",   "iterations",
      "residual",   "error"};
  return cols;
}

std::vector<ResultRow> run(const ExperimentConfig& config) {
  const BlockFeatureModel model = config.model();

  struct Task {
    double alpha, eps_t;
    bool theory;
    int index;
  };
  std::vector<Task> tasks;
  const bool wants_theory =
      config.mode == Mode::kSe || config.mode == Mode::kCompare;
  const bool wants_sim = config.mode == Mode::kSimulate ||
                         config.mode == Mode::kCompare ||
                         config.mode == Mode::kSurrogate ||
                         config.mode == Mode::kFgm;
  if (config.mode == Mode::kAsymptotic) {
    for (double eps_t : config.eps_ts)
      tasks.push_back({0.0, eps_t, true, static_cast<int>(tasks.size())});
  } else {
    for (double alpha : config.alphas)
      for (double eps_t : config.eps_ts) {
        if (wants_theory)
          tasks.push_back({alpha, eps_t, true, static_cast<int>(tasks.size())});
        if (wants_sim)
          tasks.push_back(
              {alpha, eps_t, false, static_cast<int>(tasks.size())});
      }
  }

  std::vector<ResultRow> rows(tasks.size());
  parallel_tasks(config.jobs, static_cast<int>(tasks.size()), [&](int i) {
    const Task& t = tasks[i];
    try {
      if (config.mode == Mode::kAsymptotic)
        rows[i] = asymptotic_row(config, model, t.eps_t);
      else if (t.theory)
        rows[i] = theory_row(config, model, t.alpha, t.eps_t);
      else
        rows[i] = simulation_row(config, model, config.mode, t.alpha, t.eps_t,
                                 config.base_seed + 7919ULL * t.index);
    } catch (const std::exception& e) {
      ResultRow row;
      row.preset = config.preset;
      row.provenance = t.theory ? "theory" : "simulation";
      row.alpha = t.alpha;
      row.lambda = config.lambda;
      row.tau = config.tau;
      row.eps_t = t.eps_t;
      row.eps_g = config.eps_g;
      row.error = e.what();
      rows[i] = row;
    }
  });

  // Compare mode: attach z-scores of theory vs simulation per grid point.
  if (config.mode == Mode::kCompare) {
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
      ResultRow& th = rows[i];
      const ResultRow& sim = rows[i + 1];
      if (!th.error.empty() || !sim.error.empty()) continue;
      auto zscore = [](const std::optional<double>& a,
                       const std::optional<double>& b,
                       const std::optional<double>& sem) {
        if (!a || !b || !sem || *sem <= 0.0) return std::optional<double>();
        return std::optional<double>(std::abs(*a - *b) / *sem);
      };
      th.z_egen = zscore(th.egen, sim.egen, sim.egen_sem);
      th.z_ebnd = zscore(th.ebnd, sim.ebnd, sim.ebnd_sem);
      th.z_eadv = zscore(th.eadv, sim.eadv, sim.eadv_sem);
      th.z_etrain = zscore(th.etrain, sim.etrain, sim.etrain_sem);
    }
  }
  return rows;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  const auto& cols = result_columns();
  for (std::size_t i = 0; i < cols.size(); ++i)
    os << cols[i] << (i + 1 < cols.size() ? "," : "\n");
  for (const ResultRow& r : rows) {
    os << r.preset << ',' << r.provenance << ',' << fmt(r.alpha) << ','
       << fmt(r.lambda) << ',' << fmt(r.tau) << ',' << fmt(r.eps_t) << ','
       << fmt(r.eps_g) << ',' << r.d << ',' << r.seeds << ',' << cell(r.m)
       << ',' << cell(r.q) << ',' << cell(r.v) << ',' << cell(r.p) << ','
       << cell(r.a) << ',' << cell(r.f) << ',' << cell(r.n) << ','
       << cell(r.rho) << ',' << cell(r.egen) << ',' << cell(r.ebnd) << ','
       << cell(r.eadv) << ',' << cell(r.etrain) << ',' << cell(r.ltrain) << ','
       << cell(r.ecp) << ',' << cell(r.m_sem) << ',' << cell(r.q_sem) << ','
       << cell(r.p_sem) << ',' << cell(r.a_sem) << ',' << cell(r.f_sem) << ','
       << cell(r.n_sem) << ',' << cell(r.egen_sem) << ',' << cell(r.ebnd_sem)
       << ',' << cell(r.eadv_sem) << ',' << cell(r.etrain_sem) << ','
       << cell(r.ltrain_sem) << ',' << cell(r.ecp_sem) << ',' << cell(r.z_egen)
       << ',' << cell(r.z_ebnd) << ',' << cell(r.z_eadv) << ','
       << cell(r.z_etrain) << ','
       << (r.iterations ? std::to_string(*r.iterations) : std::string()) << ','
       << cell(r.residual) << ',' << r.error << '\n';
  }
  return os.str();
}

std::vector<ResultRow> rows_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("rows_from_csv: empty input");
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    std::istringstream ls(line);
    while (std::getline(ls, cur, ',')) cells.push_back(cur);
    cells.resize(result_columns().size());
    ResultRow r;
    int k = 0;
    r.preset = cells[k++];
    r.provenance = cells[k++];
    r.alpha = std::stod(cells[k++]);
    r.lambda = std::stod(cells[k++]);
    r.tau = std::stod(cells[k++]);
    r.eps_t = std::stod(cells[k++]);
    r.eps_g = std::stod(cells[k++]);
    r.d = std::stoi(cells[k++]);
    r.seeds = std::stoi(cells[k++]);
    r.m = parse_cell(cells[k++]);
    r.q = parse_cell(cells[k++]);
    r.v = parse_cell(cells[k++]);
    r.p = parse_cell(cells[k++]);
    r.a = parse_cell(cells[k++]);
    r.f = parse_cell(cells[k++]);
    r.n = parse_cell(cells[k++]);
    r.rho = parse_cell(cells[k++]);
    r.egen = parse_cell(cells[k++]);
    r.ebnd = parse_cell(cells[k++]);
    r.eadv = parse_cell(cells[k++]);
    r.etrain = parse_cell(cells[k++]);
    r.ltrain = parse_cell(cells[k++]);
    r.ecp = parse_cell(cells[k++]);
    r.m_sem = parse_cell(cells[k++]);
    r.q_sem = parse_cell(cells[k++]);
    r.p_sem = parse_cell(cells[k++]);
    r.a_sem = parse_cell(cells[k++]);
    r.f_sem = parse_cell(cells[k++]);
    r.n_sem = parse_cell(cells[k++]);
    r.egen_sem = parse_cell(cells[k++]);
    r.ebnd_sem = parse_cell(cells[k++]);
    r.eadv_sem = parse_cell(cells[k++]);
    r.etrain_sem = parse_cell(cells[k++]);
    r.ltrain_sem = parse_cell(cells[k++]);
    r.ecp_sem = parse_cell(cells[k++]);
    r.z_egen = parse_cell(cells[k++]);
    r.z_ebnd = parse_cell(cells[k++]);
    r.z_eadv = parse_cell(cells[k++]);
    r.z_etrain = parse_cell(cells[k++]);
    if (!cells[k].empty()) r.iterations = std::stoi(cells[k]);
    ++k;
    r.residual = parse_cell(cells[k++]);
    r.error = cells[k++];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_csv: cannot open " + path);
  os << rows_to_csv(rows);
  if (!os) throw std::runtime_error("write_csv: write failed for " + path);
}

void write_json(const std::vector<ResultRow>& rows, const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ResultRow& r : rows) {
    nlohmann::json j;
    j["preset"] = r.preset;
    j["provenance"] = r.provenance;
    j["alpha"] = r.alpha;
    j["lambda"] = r.lambda;
    j["tau"] = r.tau;
    j["eps_t"] = r.eps_t;
    j["eps_g"] = r.eps_g;
    j["d"] = r.d;
    j["seeds"] = r.seeds;
    json_put(j, "m", r.m);
    json_put(j, "q", r.q);
    json_put(j, "V", r.v);
    json_put(j, "P", r.p);
    json_put(j, "A", r.a);
    json_put(j, "F", r.f);
    json_put(j, "N", r.n);
    json_put(j, "rho", r.rho);
    json_put(j, "egen", r.egen);
    json_put(j, "ebnd", r.ebnd);
    json_put(j, "eadv", r.eadv);
    json_put(j, "etrain", r.etrain);
    json_put(j, "ltrain", r.ltrain);
    json_put(j, "ecp", r.ecp);
    json_put(j, "egen_sem", r.egen_sem);
    json_put(j, "ebnd_sem", r.ebnd_sem);
    json_put(j, "eadv_sem", r.eadv_sem);
    json_put(j, "etrain_sem", r.etrain_sem);
    json_put(j, "ltrain_sem", r.ltrain_sem);
    json_put(j, "ecp_sem", r.ecp_sem);
    json_put(j, "z_egen", r.z_egen);
    json_put(j, "z_ebnd", r.z_ebnd);
    json_put(j, "z_eadv", r.z_eadv);
    json_put(j, "z_etrain", r.z_etrain);
    if (r.iterations)
      j["iterations"] = *r.iterations;
    else
      j["iterations"] = nullptr;
    json_put(j, "residual", r.residual);
    j["error"] = r.error;
    arr.push_back(std::move(j));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_json: cannot open " + path);
  os << arr.dump(2) << '\n';
  if (!os) throw std::runtime_error("write_json: write failed for " + path);
}

}  // namespace advse
