#pragma once

#include <cstdint>
#include <string>

#include "museg/atlas.hpp"

namespace museg {

/// Every tunable the pipeline exposes. Defaults are the pinned values the
/// descriptor and training stages are built around; block_size, orientations
/// and dwt_levels are part of the 54-feature layout and are validated rather
/// than free.
struct RunConfig {
    std::uint64_t seed = 1;
    int block_size = 16;
    int hog_orientations = 9;
    double log_sigma = 1.5;
    int log_size = 5;
    int dwt_levels = 3;
    int rounds = 500;
    int erosion_radius = 2;
    int bone_area_min = 100;
    int bone_area_max = 3000;
    int atlas_reference = -1; // -1: seeded random pick among contributors
    bool write_overlays = true;

    atlas::BoneParams bone_params() const { return {bone_area_min, bone_area_max}; }
};

/// Parse a config JSON; absent fields keep their defaults. Rejects values that
/// contradict the fixed descriptor layout.
RunConfig load_config(const std::string& path);

void validate_config(const RunConfig& cfg);

/// Write the fully-resolved config (the audit copy every command drops in its
/// output directory).
void save_config(const RunConfig& cfg, const std::string& path);

} // namespace museg
