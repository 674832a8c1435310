#pragma once

#include <string>

#include "advse/sim.hpp"

namespace advse {

// Flat little-endian binary layout: u32 magic, u32 version, i64 d, i64 n,
// u64 seed, u32 method tag, then the payload as 64-bit reals. JSON mirrors
// the same fields for small instances.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const std::string& text);

void save_estimator(const Estimator& est, std::uint64_t seed,
                    const std::string& path);
Estimator load_estimator(const std::string& path, std::uint64_t* seed = nullptr);

std::string estimator_to_json(const Estimator& est, std::uint64_t seed);
Estimator estimator_from_json(const std::string& text,
                              std::uint64_t* seed = nullptr);

}  // namespace advse
