#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "museg/atlas.hpp"
#include "museg/boosting.hpp"
#include "museg/config.hpp"
#include "museg/features.hpp"
#include "museg/imgio.hpp"

namespace museg::pipeline {

/// One manifest slice with its descriptors precomputed (descriptors are pure
/// in the image, so they can be shared across cross-validation folds).
struct Slice {
    std::string volume;
    int index = 0;
    GrayImage image;
    std::optional<LabelMask> mask;
    features::DescriptorGrid descriptors;
};

/// "<volume>_s<index:03>" — the stem every per-slice artifact file uses.
std::string slice_tag(const std::string& volume, int index);

std::vector<Slice> load_slices(const imgio::DatasetManifest& manifest, const RunConfig& cfg,
                               const std::string& exclude_volume = {},
                               const std::string& only_volume = {}, bool require_masks = false);

/// Non-owning views used to slice fold subsets out of the loaded set.
std::vector<const Slice*> slice_ptrs(const std::vector<Slice>& slices);

/// Block-level training samples from eroded ground truth.
boosting::TrainingSet make_training_set(std::span<const Slice* const> slices,
                                        int erosion_radius);

atlas::MuscleAtlas build_atlas_from(std::span<const Slice* const> slices, const RunConfig& cfg,
                                    int reference_index);

/// Atlas with the configured reference policy: an explicit index is used as
/// given; a negative index walks a seeded permutation of the contributors and
/// takes the first whose keypoints resolve.
atlas::MuscleAtlas build_atlas_seeded(std::span<const Slice* const> slices, const RunConfig& cfg,
                                      const std::string& tag);

} // namespace museg::pipeline
