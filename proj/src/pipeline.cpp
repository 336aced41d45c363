#include "museg/pipeline.hpp"

#include <cstdio>
#include <numeric>

#include "museg/preproc.hpp"

namespace museg::pipeline {

std::string slice_tag(const std::string& volume, int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "_s%03d", index);
    return volume + buf;
}

std::vector<Slice> load_slices(const imgio::DatasetManifest& manifest, const RunConfig& cfg,
                               const std::string& exclude_volume, const std::string& only_volume,
                               bool require_masks) {
    std::vector<Slice> out;
    for (const auto& vol : manifest.volumes) {
        if (!exclude_volume.empty() && vol.id == exclude_volume) continue;
        if (!only_volume.empty() && vol.id != only_volume) continue;
        for (const auto& entry : vol.slices) {
            if (require_masks && !entry.mask)
                throw DataError("volume '" + vol.id + "' slice " + std::to_string(entry.index) +
                                " has no ground-truth mask");
            auto [img, mask] = imgio::load_slice(manifest, entry);
            Slice s;
            s.volume = vol.id;
            s.index = entry.index;
            s.descriptors = features::assemble_descriptor(img, cfg.log_sigma, cfg.log_size);
            s.image = std::move(img);
            s.mask = std::move(mask);
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<const Slice*> slice_ptrs(const std::vector<Slice>& slices) {
    std::vector<const Slice*> out;
    out.reserve(slices.size());
    for (const Slice& s : slices) out.push_back(&s);
    return out;
}

boosting::TrainingSet make_training_set(std::span<const Slice* const> slices,
                                        int erosion_radius) {
    boosting::TrainingSet ts;
    for (const Slice* s : slices) {
        if (!s->mask) continue;
        const preproc::BlockGrid grid = preproc::grid_of(s->image);
        const LabelMask eroded = boosting::erode_labels(*s->mask, erosion_radius);
        const std::vector<int> labels = boosting::derive_block_labels(eroded, grid);
        for (int r = 0; r < grid.rows; ++r)
            for (int c = 0; c < grid.cols; ++c) {
                ts.x.push_back(s->descriptors.at(r, c));
                ts.y.push_back(labels[static_cast<size_t>(r) * grid.cols + c]);
                ts.origin.push_back({s->volume, s->index, r, c});
            }
    }
    return ts;
}

atlas::MuscleAtlas build_atlas_from(std::span<const Slice* const> slices, const RunConfig& cfg,
                                    int reference_index) {
    std::vector<LabelMask> masks;
    std::vector<GrayImage> images;
    std::vector<std::string> names;
    for (const Slice* s : slices) {
        if (!s->mask) throw DataError("atlas contributor without mask");
        masks.push_back(*s->mask);
        images.push_back(s->image);
        names.push_back(slice_tag(s->volume, s->index));
    }
    return atlas::build_atlas(masks, images, reference_index, cfg.bone_params(), names);
}

atlas::MuscleAtlas build_atlas_seeded(std::span<const Slice* const> slices, const RunConfig& cfg,
                                      const std::string& tag) {
    if (cfg.atlas_reference >= 0) {
        if (cfg.atlas_reference >= static_cast<int>(slices.size()))
            throw DataError("atlas reference index out of range");
        return build_atlas_from(slices, cfg, cfg.atlas_reference);
    }

    // seeded permutation over contributors; a reference whose keypoints fail
    // is skipped in favor of the next candidate
    std::uint64_t h = cfg.seed;
    for (char ch : tag) h = hash_combine(h, static_cast<std::uint64_t>(ch));
    Rng rng(h);
    std::vector<size_t> order(slices.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.next_below(i)]);

    for (size_t idx : order) {
        const Slice* s = slices[idx];
        try {
            (void)atlas::keypoints_from_mask(*s->mask,
                                             atlas::bone_centroid(s->image, cfg.bone_params()));
        } catch (const PipelineError& e) {
            std::fprintf(stderr, "warning: atlas reference %s unusable (%s); trying next\n",
                         slice_tag(s->volume, s->index).c_str(), e.what());
            continue;
        }
        return build_atlas_from(slices, cfg, static_cast<int>(idx));
    }
    throw PipelineError("no usable atlas reference among " + std::to_string(slices.size()) +
                        " contributors");
}

} // namespace museg::pipeline
