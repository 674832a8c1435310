#include "advse/bfm.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace advse {

namespace {

void check_block(const Block& b) {
  if (!(b.fraction > 0.0) || !(b.psi > 0.0) || !(b.delta > 0.0) ||
      !(b.upsilon > 0.0) || !(b.t > 0.0))
    throw std::invalid_argument("build_bfm: block parameters must be positive");
}

}  // namespace

double BlockFeatureModel::rho() const {
  double r = 0.0;
  for (const Block& b : blocks_) r += b.fraction * b.psi * b.t;
  return r;
}

double BlockFeatureModel::attack_teacher_norm() const {
  double a = 0.0;
  for (const Block& b : blocks_) a += b.fraction * b.upsilon * b.t;
  return a;
}

BlockFeatureModel build_bfm(std::vector<Block> blocks,
                            std::optional<PowerLaw> power_law) {
  if (blocks.empty())
    throw std::invalid_argument("build_bfm: block list must not be empty");
  for (const Block& b : blocks) check_block(b);

  if (power_law) {
    if (power_law->modes < 1)
      throw std::invalid_argument("build_bfm: power law needs >= 1 mode");
    if (blocks.size() != 1)
      throw std::invalid_argument(
          "build_bfm: power-law mode takes a single template block");
    const Block tmpl = blocks.front();
    const int n = power_law->modes;
    blocks.clear();
    blocks.reserve(n);
    for (int i = 1; i <= n; ++i) {
      Block b = tmpl;
      b.fraction = 1.0 / n;
      b.psi = std::pow(static_cast<double>(i), -power_law->beta);
      blocks.push_back(b);
    }
  }

  double frac_sum = 0.0;
  for (const Block& b : blocks) frac_sum += b.fraction;
  for (Block& b : blocks) b.fraction /= frac_sum;

  double delta_trace = 0.0, upsilon_trace = 0.0;
  for (const Block& b : blocks) {
    delta_trace += b.fraction * b.delta;
    upsilon_trace += b.fraction * b.upsilon;
  }
  for (Block& b : blocks) {
    b.delta /= delta_trace;
    b.upsilon /= upsilon_trace;
  }

  BlockFeatureModel model;
  model.blocks_ = std::move(blocks);
  model.normalized_ = true;
  model.power_law_ = power_law;
  if (!(model.rho() > 0.0))
    throw std::invalid_argument("build_bfm: rho must be positive");
  return model;
}

BlockFeatureModel bfm_from_normalized_blocks(std::vector<Block> blocks) {
  if (blocks.empty())
    throw std::invalid_argument("bfm_from_normalized_blocks: empty block list");
  for (const Block& b : blocks) check_block(b);
  BlockFeatureModel model;
  model.blocks_ = std::move(blocks);
  model.normalized_ = true;
  return model;
}

std::vector<SpectralAtom> spectral_atoms(const BlockFeatureModel& model) {
  const double r = model.rho();
  std::vector<SpectralAtom> atoms;
  atoms.reserve(model.blocks().size());
  for (const Block& b : model.blocks())
    atoms.push_back(
        {b.fraction, b.psi, b.delta, b.upsilon, b.psi * b.psi * b.t / r});
  return atoms;
}

double rho(const BlockFeatureModel& model) { return model.rho(); }

std::string BlockFeatureModel::to_json() const {
  nlohmann::json j;
  j["blocks"] = nlohmann::json::array();
  for (const Block& b : blocks_)
    j["blocks"].push_back({{"phi", b.fraction},
                           {"psi", b.psi},
                           {"delta", b.delta},
                           {"upsilon", b.upsilon},
                           {"t", b.t}});
  if (power_law_)
    j["power_law"] = {{"beta", power_law_->beta}, {"modes", power_law_->modes}};
  else
    j["power_law"] = nullptr;
  return j.dump();
}

BlockFeatureModel BlockFeatureModel::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  std::vector<Block> blocks;
  for (const auto& jb : j.at("blocks"))
    blocks.push_back({jb.at("phi").get<double>(), jb.at("psi").get<double>(),
                      jb.at("delta").get<double>(),
                      jb.at("upsilon").get<double>(), jb.at("t").get<double>()});
  std::optional<PowerLaw> pl;
  if (j.contains("power_law") && !j.at("power_law").is_null())
    pl = PowerLaw{j.at("power_law").at("beta").get<double>(),
                  j.at("power_law").at("modes").get<int>()};
  if (pl) {
    // The stored blocks for a power-law model are the expanded modes; keep
    // them as-is rather than re-expanding from a template.
    BlockFeatureModel model = bfm_from_normalized_blocks(std::move(blocks));
    model.power_law_ = pl;
    return model;
  }
  return bfm_from_normalized_blocks(std::move(blocks));
}

}  // namespace advse
