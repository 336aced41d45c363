#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "museg/config.hpp"
#include "museg/image.hpp"
#include "museg/imgio.hpp"

namespace museg::metrics {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
};

/// Pixelwise counts; "muscle" means any label > 0 on either side.
ConfusionCounts confusion(const LabelMask& pred, const LabelMask& truth);

/// TP/(TP+FN); an empty denominator scores 1 when the prediction is also
/// empty, else 0. Same convention for precision and dice.
double recall(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
double dice(const LabelMask& pred, const LabelMask& truth);
double dice_from_counts(const ConfusionCounts& c);

/// Dice between the supports of one specific label on both sides.
double dice_for_label(const LabelMask& pred, const LabelMask& truth, int label);

// ---------------------------------------------------------------------------
// Reports and cross-validation
// ---------------------------------------------------------------------------

struct SliceScore {
    std::string volume;
    int slice = 0;
    double recall = 0.0;
    double precision = 0.0;
    double dice = 0.0;
};

struct LabeledScore {
    std::string volume;
    int slice = 0;
    int muscle = 0;
    double dice = 0.0;
};

struct VolumeSummary {
    std::string volume; // "ALL" aggregates every slice
    double mean_recall = 0.0, std_recall = 0.0;
    double mean_precision = 0.0, std_precision = 0.0;
    double mean_dice = 0.0, std_dice = 0.0;
};

struct EvalReport {
    std::vector<SliceScore> slices;      // sorted by (volume, slice)
    std::vector<LabeledScore> labeled;   // per-muscle dice of the labeled output
    std::vector<VolumeSummary> summary;  // per volume plus the ALL row

    double mean_labeled_dice() const;
};

/// Mean and sample standard deviation (n-1; 0 for a single slice) per volume.
std::vector<VolumeSummary> summarize(const std::vector<SliceScore>& slices);

void save_report(const EvalReport& report, const std::string& dir);

/// Leave-one-volume-out driver: for each fold, train AdaBoost and build the
/// atlas on the remaining volumes, then predict, label and score the held-out
/// slices against full-resolution ground truth. Fold artifacts (model, atlas,
/// masks, overlays) are written under out_dir/fold_<volume>/ when out_dir is
/// non-empty. Per-slice stage failures are reported on stderr and skipped
/// without aborting the fold.
EvalReport cross_validate(const imgio::DatasetManifest& manifest, const RunConfig& cfg,
                          const std::string& out_dir = {});

} // namespace museg::metrics
