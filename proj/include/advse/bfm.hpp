#pragma once

#include <optional>
#include <string>
#include <vector>

namespace advse {

// One feature block of the data model. `fraction` is the relative block
// size d_l / d; the remaining fields are the eigenvalues of the data,
// defence, attack and teacher covariances on that block.
struct Block {
  double fraction;
  double psi;      // data variance
  double delta;    // defence weight
  double upsilon;  // attack weight
  double t;        // teacher variance
};

struct PowerLaw {
  double beta;
  int modes;
};

// One atom of the joint spectral measure. theta2_mass is the averaged-teacher
// second moment per mode, psi^2 t / rho.
struct SpectralAtom {
  double weight;
  double omega;    // data eigenvalue
  double zeta;     // defence eigenvalue
  double upsilon;  // attack eigenvalue
  double theta2_mass;
};

class BlockFeatureModel {
 public:
  const std::vector<Block>& blocks() const { return blocks_; }
  bool normalized() const { return normalized_; }
  const std::optional<PowerLaw>& power_law() const { return power_law_; }

  // rho = sum_l phi_l psi_l t_l, the limit of theta0' Sigma_x theta0 / d.
  double rho() const;

  // a = theta0' Sigma_upsilon theta0 / d = sum_l phi_l upsilon_l t_l.
  double attack_teacher_norm() const;

  std::string to_json() const;
  static BlockFeatureModel from_json(const std::string& text);

 private:
  friend BlockFeatureModel build_bfm(std::vector<Block>,
                                     std::optional<PowerLaw>);
  friend BlockFeatureModel bfm_from_normalized_blocks(std::vector<Block>);

  std::vector<Block> blocks_;
  bool normalized_ = false;
  std::optional<PowerLaw> power_law_;
};

// Builds a model from raw blocks: fractions are renormalised to sum to one
// and the defence/attack spectra are normalised to unit average eigenvalue.
// In power-law mode the (single) template block supplies t, delta, upsilon
// and one equal-weight mode per index i with psi_i = i^-beta is generated.
BlockFeatureModel build_bfm(std::vector<Block> blocks,
                            std::optional<PowerLaw> power_law = std::nullopt);

// Wraps already-normalised blocks without touching them. Used for spectrum
// perturbations that must not be renormalised.
BlockFeatureModel bfm_from_normalized_blocks(std::vector<Block> blocks);

std::vector<SpectralAtom> spectral_atoms(const BlockFeatureModel& model);

double rho(const BlockFeatureModel& model);

}  // namespace advse
