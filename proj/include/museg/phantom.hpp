#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "museg/image.hpp"
#include "museg/imgio.hpp"

namespace museg::phantom {

struct Band {
    double lo = 0.0;
    double hi = 0.0;
    double mid() const { return 0.5 * (lo + hi); }
};

/// Deterministic thigh-like slice generator: bright fat ring, K muscle wedges
/// around a dark bone with bright marrow, thin bright septa between wedges.
/// Every random draw comes from SplitMix64 streams keyed by (seed, slice,
/// tissue), so output is byte-identical per (seed, slice index).
struct PhantomSpec {
    std::uint64_t seed = 1;
    int width = 256;
    int height = 256;
    int muscles = 6;            // K
    int slices_per_volume = 5;

    Band bone_band{0.05, 0.15};
    Band muscle_band{0.35, 0.55};
    Band fat_band{0.75, 0.95};
    double septa_level = 0.8;
    double air_level = 0.05;

    double noise_variance = 0.0009;      // Gaussian pixel noise
    double striation_frequency = 0.30;   // cycles per pixel
    double striation_amplitude = 0.02;
    double jitter = 1.5;                 // max inter-slice boundary drift, pixels
    double subject_shift = 2.0;          // max per-volume placement offset, pixels

    // Geometry; negative coordinates mean "derive the default from dims".
    double bone_center_x = -1.0, bone_center_y = -1.0; // default (0.5 W, 0.547 H)
    double bone_radius = 22.0;
    double marrow_radius = 8.0;
    double muscle_center_x = -1.0, muscle_center_y = -1.0; // default (0.5 W, 0.492 H)
    double muscle_axis_x = 92.0, muscle_axis_y = 88.0;
    double fat_axis_x = 106.0, fat_axis_y = 102.0;
    double septum_half_width = 1.0;

    // Distal lobe: a rounded prominence on the muscle boundary that gives the
    // cross-section a stable most-distal point (it turns with the wedges, so
    // keypoint alignment can undo inter-volume rotation).
    double lobe_amplitude = 0.25; // fraction of muscle_axis_y
    double lobe_width = 0.13;     // angular std dev, radians
    double lobe_angle = 0.04;     // offset from straight-up, radians

    Point2 bone_center() const;
    Point2 muscle_center() const;
};

/// Validate ranges and geometric feasibility; throws DataError.
void validate_spec(const PhantomSpec& spec);

/// Spec JSON with defaults for absent fields.
PhantomSpec load_spec(const std::string& path);
void save_spec(const PhantomSpec& spec, const std::string& path);

/// All slices of one volume, deterministic in (spec.seed, slice index).
std::vector<std::pair<GrayImage, LabelMask>> generate_volume(const PhantomSpec& spec);

/// Write `volumes` volumes (volume v is generated with seed = base seed XOR v)
/// under out_dir and return the saved manifest.
imgio::DatasetManifest generate_dataset(const PhantomSpec& spec, int volumes,
                                        const std::string& out_dir);

} // namespace museg::phantom
