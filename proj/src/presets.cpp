#include "advse/presets.hpp"

#include <stdexcept>

namespace advse {

namespace {

std::vector<Preset> make_presets() {
  std::vector<Preset> p;
  // Usefulness/robustness quadrants: single block, Delta = Upsilon = 1.
  p.push_back({"fig1-lr-lu", {{1.0, 0.5, 1.0, 1.0, 2.0}}, std::nullopt});
  p.push_back({"fig1-lr-hu", {{1.0, 0.5, 1.0, 1.0, 8.0}}, std::nullopt});
  p.push_back({"fig1-hr-lu", {{1.0, 2.0, 1.0, 1.0, 0.5}}, std::nullopt});
  p.push_back({"fig1-hr-hu", {{1.0, 2.0, 1.0, 1.0, 2.0}}, std::nullopt});
  // Two-block defence strategies, psi = (5, 0.2), equal sizes.
  p.push_back({"fig2-left-protect-robust",
               {{0.5, 5.0, 2.0, 1.0, 1.0}, {0.5, 0.2, 1.0, 1.0, 1.0}},
               std::nullopt});
  p.push_back({"fig2-left-uniform",
               {{0.5, 5.0, 1.0, 1.0, 1.0}, {0.5, 0.2, 1.0, 1.0, 1.0}},
               std::nullopt});
  p.push_back({"fig2-left-protect-nonrobust",
               {{0.5, 5.0, 1.0, 1.0, 1.0}, {0.5, 0.2, 2.0, 1.0, 1.0}},
               std::nullopt});
  // Power-law data spectrum, uniform attack and defence.
  p.push_back(
      {"fig2-right-powerlaw", {{1.0, 1.0, 1.0, 1.0, 1.0}}, PowerLaw{1.5, 1000}});
  // Identity single block used by the regularisation-equivalence figure.
  p.push_back({"fig4-single-block", {{1.0, 1.0, 1.0, 1.0, 1.0}}, std::nullopt});
  // Defendable attack direction: tiny informative block, eps_g = 0.006.
  p.push_back({"fig4-defendable",
               {{0.01, 1.0, 1.0, 1.0, 1.0}, {0.99, 1.0, 1e3, 1e3, 1e3}},
               std::nullopt,
               0.006});
  return p;
}

}  // namespace

const std::vector<Preset>& all_presets() {
  static const std::vector<Preset> presets = make_presets();
  return presets;
}

const Preset& preset_by_name(const std::string& name) {
  for (const Preset& p : all_presets())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown preset: " + name);
}

bool has_preset(const std::string& name) {
  for (const Preset& p : all_presets())
    if (p.name == name) return true;
  return false;
}

}  // namespace advse
