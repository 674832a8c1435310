#include "advse/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace advse {

namespace {

constexpr std::uint32_t kDatasetMagic = 0x41445644;    // "ADVD"
constexpr std::uint32_t kEstimatorMagic = 0x41445645;  // "ADVE"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_doubles(std::ostream& os, const double* p, std::size_t count) {
  os.write(reinterpret_cast<const char*>(p), count * sizeof(double));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::int64_t read_i64(std::istream& is) {
  std::int64_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
void read_doubles(std::istream& is, double* p, std::size_t count) {
  is.read(reinterpret_cast<char*>(p), count * sizeof(double));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("serialize: cannot open " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("serialize: cannot open " + path);
  return is;
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream os = open_out(path);
  const std::int64_t d = data.x.cols(), n = data.x.rows();
  write_u32(os, kDatasetMagic);
  write_u32(os, kVersion);
  write_i64(os, d);
  write_i64(os, n);
  write_u64(os, data.seed);
  write_u32(os, 0);
  write_doubles(os, data.theta0.data(), d);
  // Row-major sample blocks.
  std::vector<double> row(d);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < d; ++j) row[j] = data.x(i, j);
    write_doubles(os, row.data(), d);
  }
  write_doubles(os, data.y.data(), n);
  const std::string model_json = data.model.to_json();
  write_i64(os, static_cast<std::int64_t>(model_json.size()));
  os.write(model_json.data(), model_json.size());
  if (!os) throw std::runtime_error("serialize: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is = open_in(path);
  if (read_u32(is) != kDatasetMagic)
    throw std::runtime_error("load_dataset: bad magic in " + path);
  if (read_u32(is) != kVersion)
    throw std::runtime_error("load_dataset: unsupported version in " + path);
  const std::int64_t d = read_i64(is);
  const std::int64_t n = read_i64(is);
  Dataset data;
  data.seed = read_u64(is);
  read_u32(is);
  data.theta0.resize(d);
  read_doubles(is, data.theta0.data(), d);
  data.x.resize(n, d);
  std::vector<double> row(d);
  for (std::int64_t i = 0; i < n; ++i) {
    read_doubles(is, row.data(), d);
    for (std::int64_t j = 0; j < d; ++j) data.x(i, j) = row[j];
  }
  data.y.resize(n);
  read_doubles(is, data.y.data(), n);
  const std::int64_t len = read_i64(is);
  std::string model_json(len, '\0');
  is.read(model_json.data(), len);
  if (!is) throw std::runtime_error("load_dataset: truncated file " + path);
  data.model = BlockFeatureModel::from_json(model_json);
  data.block_sizes = block_sizes(data.model, static_cast<int>(d));
  return data;
}

void save_estimator(const Estimator& est, std::uint64_t seed,
                    const std::string& path) {
  std::ofstream os = open_out(path);
  const std::int64_t d = est.theta.size();
  write_u32(os, kEstimatorMagic);
  write_u32(os, kVersion);
  write_i64(os, d);
  write_i64(os, est.iterations);
  write_u64(os, seed);
  write_u32(os, static_cast<std::uint32_t>(est.method));
  write_doubles(os, est.theta.data(), d);
  const double res = est.residual;
  write_doubles(os, &res, 1);
  if (!os) throw std::runtime_error("serialize: write failed for " + path);
}

Estimator load_estimator(const std::string& path, std::uint64_t* seed) {
  std::ifstream is = open_in(path);
  if (read_u32(is) != kEstimatorMagic)
    throw std::runtime_error("load_estimator: bad magic in " + path);
  if (read_u32(is) != kVersion)
    throw std::runtime_error("load_estimator: unsupported version in " + path);
  const std::int64_t d = read_i64(is);
  Estimator est;
  est.iterations = static_cast<int>(read_i64(is));
  const std::uint64_t s = read_u64(is);
  if (seed) *seed = s;
  est.method = static_cast<Method>(read_u32(is));
  est.theta.resize(d);
  read_doubles(is, est.theta.data(), d);
  read_doubles(is, &est.residual, 1);
  if (!is) throw std::runtime_error("load_estimator: truncated file " + path);
  return est;
}

std::string dataset_to_json(const Dataset& data) {
  const std::int64_t d = data.x.cols(), n = data.x.rows();
  nlohmann::json j;
  j["d"] = d;
  j["n"] = n;
  j["seed"] = data.seed;
  j["model"] = nlohmann::json::parse(data.model.to_json());
  j["theta0"] = std::vector<double>(data.theta0.data(), data.theta0.data() + d);
  j["y"] = std::vector<double>(data.y.data(), data.y.data() + n);
  nlohmann::json rows = nlohmann::json::array();
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    for (std::int64_t k = 0; k < d; ++k) row[k] = data.x(i, k);
    rows.push_back(std::move(row));
  }
  j["x"] = std::move(rows);
  return j.dump();
}

Dataset dataset_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Dataset data;
  const std::int64_t d = j.at("d").get<std::int64_t>();
  const std::int64_t n = j.at("n").get<std::int64_t>();
  data.seed = j.at("seed").get<std::uint64_t>();
  data.model = BlockFeatureModel::from_json(j.at("model").dump());
  const auto theta0 = j.at("theta0").get<std::vector<double>>();
  data.theta0 = Eigen::Map<const Eigen::VectorXd>(theta0.data(), d);
  const auto y = j.at("y").get<std::vector<double>>();
  data.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  data.x.resize(n, d);
  std::int64_t i = 0;
  for (const auto& jrow : j.at("x")) {
    const auto row = jrow.get<std::vector<double>>();
    for (std::int64_t k = 0; k < d; ++k) data.x(i, k) = row[k];
    ++i;
  }
  data.block_sizes = block_sizes(data.model, static_cast<int>(d));
  return data;
}

std::string estimator_to_json(const Estimator& est, std::uint64_t seed) {
  nlohmann::json j;
  j["d"] = est.theta.size();
  j["seed"] = seed;
  j["method"] = static_cast<int>(est.method);
  j["iterations"] = est.iterations;
  j["residual"] = est.residual;
  j["theta"] = std::vector<double>(est.theta.data(),
                                   est.theta.data() + est.theta.size());
  return j.dump();
}

Estimator estimator_from_json(const std::string& text, std::uint64_t* seed) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Estimator est;
  if (seed) *seed = j.at("seed").get<std::uint64_t>();
  est.method = static_cast<Method>(j.at("method").get<int>());
  est.iterations = j.at("iterations").get<int>();
  est.residual = j.at("residual").get<double>();
  const auto theta = j.at("theta").get<std::vector<double>>();
  est.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
  return est;
}

}  // namespace advse
