#pragma once

#include <optional>
#include <string>
#include <vector>

#include "museg/image.hpp"

namespace museg::imgio {

/// Load an 8/16-bit single-channel PNG or PGM; intensities are divided by the
/// format's declared maximum so the full bit range maps onto [0,1].
GrayImage load_image(const std::string& path);

/// Quantize to the given bit depth (8 or 16) and write PNG or PGM by extension.
void save_image(const GrayImage& img, const std::string& path, int bit_depth = 16);

/// Load a label mask (8-bit single-channel PNG); pixel values are label ids.
/// A palette sidecar "<path>.json" of the form {"1": "name", ...} is read if present.
LabelMask load_mask(const std::string& path);

/// Lossless mask write (8-bit PNG) plus palette sidecar when the palette is non-empty.
void save_mask(const LabelMask& mask, const std::string& path);

/// RGB PNG: deterministic per-label colors alpha-blended (alpha = 0.5) over the grayscale.
void save_overlay(const GrayImage& img, const LabelMask& mask, const std::string& path);

/// Fixed color table entry for label id (id 0 is never colored).
void label_color(int id, std::uint8_t rgb[3]);

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

struct SliceEntry {
    int index = 0;
    std::string image;               // path, relative to the manifest directory
    std::optional<std::string> mask; // ditto
};

struct VolumeEntry {
    std::string id;
    std::vector<SliceEntry> slices; // strictly increasing indices
};

struct DatasetManifest {
    std::vector<VolumeEntry> volumes; // sorted by id
    std::string base_dir;             // directory the relative paths resolve against

    std::string resolve(const std::string& rel) const;
};

/// Parse and validate a manifest file. Volumes are sorted by id; slice indices
/// must be strictly increasing and every referenced path must exist.
DatasetManifest load_manifest(const std::string& path);

void save_manifest(const DatasetManifest& manifest, const std::string& path);

/// Load an entry's image and (if present) mask; mask dimensions must match.
std::pair<GrayImage, std::optional<LabelMask>> load_slice(const DatasetManifest& m,
                                                          const SliceEntry& e);
GrayImage load_slice_image(const DatasetManifest& m, const SliceEntry& e);

} // namespace museg::imgio
