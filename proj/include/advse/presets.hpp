#pragma once

#include <string>
#include <vector>

#include "advse/bfm.hpp"

namespace advse {

// A named experiment configuration with the constants used by the standard
// figures. Block parameters are stored raw; call model() to build the
// trace-normalised model.
struct Preset {
  std::string name;
  std::vector<Block> blocks;
  std::optional<PowerLaw> power_law;
  double eps_g = 0.2;
  double lambda = 1e-3;
  double tau = 0.05;

  BlockFeatureModel model() const { return build_bfm(blocks, power_law); }
};

const std::vector<Preset>& all_presets();
const Preset& preset_by_name(const std::string& name);
bool has_preset(const std::string& name);

}  // namespace advse
