#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "museg/common.hpp"
#include "museg/image.hpp"

namespace museg::atlas {

struct BoneParams {
    int min_area = 100;  // connected-component area bounds, pixels
    int max_area = 3000;
};

/// Centroid of the most circular dark connected component.
/// Thresholds at the lower Otsu class of the 256-bin intensity histogram,
/// takes 8-connected components with area inside [min,max], and picks the one
/// maximizing 4*pi*A/P^2 with the moment-equivalent perimeter
/// P = 2*pi*sqrt(2*mu2/A). Throws PipelineError when no candidate survives.
Point2 bone_centroid(const GrayImage& image, const BoneParams& params = {});

struct Keypoints {
    Point2 bone_centroid;
    Point2 distal_point;        // hull vertex farthest from the centroid
    std::vector<Point2> hull;   // convex, counterclockwise in (x,y) math orientation
};

/// Convex hull of the mask's foreground pixel centers (any label > 0) plus the
/// distal point w.r.t. the given centroid. Distance ties prefer the vertex with
/// the smaller atan2 angle about the centroid. Throws PipelineError for empty
/// or collinear foreground.
Keypoints keypoints_from_mask(const LabelMask& mask, Point2 centroid);

/// Similarity transform: p' = pivot + scale * R(rotation) * (p + translation - pivot).
/// Maps target-frame points onto the reference frame.
struct Alignment {
    Point2 translation;   // applied first
    double rotation = 0.0; // radians, in (-pi, pi]
    double scale = 1.0;
    Point2 pivot;          // reference bone centroid

    Point2 apply(Point2 p) const;
    Point2 apply_inverse(Point2 p) const;
    Alignment inverted() const;
};

/// Translation aligns the bone centroids, rotation is the signed angle from the
/// target's centroid->distal vector onto the reference's, scale their length
/// ratio. Throws PipelineError when the target vector has zero length.
Alignment compute_alignment(const Keypoints& ref, const Keypoints& tgt);

/// Inverse-mapping rasterization with nearest-neighbor label sampling; output
/// pixel p samples the source at A^-1(p). Out-of-bounds samples are background.
LabelMask warp_mask(const LabelMask& mask, const Alignment& a, int out_width, int out_height);

/// Same, sampling at A(p): undoes warp_mask up to resampling.
LabelMask warp_back(const LabelMask& mask, const Alignment& a, int out_width, int out_height);

// ---------------------------------------------------------------------------
// Probabilistic atlas
// ---------------------------------------------------------------------------

struct MuscleMap {
    std::vector<std::uint16_t> counts; // contributor overlap count per pixel
    int peak = 0;
    std::vector<std::uint8_t> region;  // counts >= ceil(peak/2), the truncated contour
};

struct MuscleAtlas {
    int width = 0;
    int height = 0;
    int contributors = 0;
    Keypoints reference;               // keypoints defining the common frame
    std::map<int, std::string> palette;
    std::map<int, MuscleMap> muscles;  // keyed by label id
};

/// ceil(0.5*peak) as an exact integer threshold; peak 0 yields an empty region.
int truncation_threshold(int peak);

/// Accumulate one already-aligned mask into the atlas counts.
void accumulate_mask(MuscleAtlas& atlas, const LabelMask& aligned);

/// Recompute peaks and truncated regions from the accumulated counts.
void truncate_regions(MuscleAtlas& atlas);

/// Count-accumulation + truncation over masks already in a common frame
/// (the criterion surface for the truncation rule).
MuscleAtlas atlas_from_aligned(std::span<const LabelMask> masks, int width, int height);

/// Full construction: every contributor is keypoint-aligned onto the reference
/// entry before accumulation. Contributors whose keypoints fail are skipped
/// with a warning on stderr. `names` tags warnings with slice provenance.
MuscleAtlas build_atlas(std::span<const LabelMask> masks, std::span<const GrayImage> images,
                        int reference_index, const BoneParams& params = {},
                        std::span<const std::string> names = {});

/// Transfer atlas labels onto a binary segmentation. Foreground geometry is
/// preserved exactly; each foreground pixel is labeled by the truncated region
/// containing its atlas-frame position (overlaps resolve to the higher count,
/// then the smaller id) or by the nearest region when it falls in none.
LabelMask label_segmentation(const LabelMask& binary, const GrayImage& image,
                             const MuscleAtlas& atlas, const BoneParams& params = {});

/// Atlas directory: atlas.json metadata + one 16-bit count PNG per muscle.
void save_atlas(const MuscleAtlas& atlas, const std::string& dir);
MuscleAtlas load_atlas(const std::string& dir);

} // namespace museg::atlas
