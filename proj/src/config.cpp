#include "museg/config.hpp"

#include <fstream>

#include <json.hpp>

#include "museg/common.hpp"

using nlohmann::json;

namespace museg {

void validate_config(const RunConfig& cfg) {
    // These three define the 54-feature descriptor layout; they are echoed in
    // the config for the audit trail but are not free parameters.
    if (cfg.block_size != 16) throw DataError("config: block_size must be 16");
    if (cfg.hog_orientations != 9) throw DataError("config: hog_orientations must be 9");
    if (cfg.dwt_levels != 3) throw DataError("config: dwt_levels must be 3");
    if (cfg.log_size < 3 || cfg.log_size % 2 == 0)
        throw DataError("config: log_size must be odd and >= 3");
    if (cfg.log_sigma <= 0.0) throw DataError("config: log_sigma must be positive");
    if (cfg.rounds < 1) throw DataError("config: rounds must be >= 1");
    if (cfg.erosion_radius < 0) throw DataError("config: erosion_radius must be >= 0");
    if (cfg.bone_area_min < 1 || cfg.bone_area_max < cfg.bone_area_min)
        throw DataError("config: bad bone area bounds");
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("config '" + path + "': " + e.what());
    }

    RunConfig cfg;
    auto get = [&](const char* key, auto& value) {
        if (j.contains(key)) value = j.at(key).get<std::decay_t<decltype(value)>>();
    };
    get("seed", cfg.seed);
    get("block_size", cfg.block_size);
    get("hog_orientations", cfg.hog_orientations);
    get("log_sigma", cfg.log_sigma);
    get("log_size", cfg.log_size);
    get("dwt_levels", cfg.dwt_levels);
    get("rounds", cfg.rounds);
    get("erosion_radius", cfg.erosion_radius);
    get("bone_area_min", cfg.bone_area_min);
    get("bone_area_max", cfg.bone_area_max);
    get("atlas_reference", cfg.atlas_reference);
    get("write_overlays", cfg.write_overlays);
    validate_config(cfg);
    return cfg;
}

void save_config(const RunConfig& cfg, const std::string& path) {
    json j;
    j["seed"] = cfg.seed;
    j["block_size"] = cfg.block_size;
    j["hog_orientations"] = cfg.hog_orientations;
    j["log_sigma"] = cfg.log_sigma;
    j["log_size"] = cfg.log_size;
    j["dwt_levels"] = cfg.dwt_levels;
    j["rounds"] = cfg.rounds;
    j["erosion_radius"] = cfg.erosion_radius;
    j["bone_area_min"] = cfg.bone_area_min;
    j["bone_area_max"] = cfg.bone_area_max;
    j["atlas_reference"] = cfg.atlas_reference;
    j["write_overlays"] = cfg.write_overlays;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write config '" + path + "'");
    out << j.dump(2) << "\n";
}

} // namespace museg
