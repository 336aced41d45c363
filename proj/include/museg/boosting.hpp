#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "museg/features.hpp"
#include "museg/image.hpp"
#include "museg/preproc.hpp"

namespace museg::boosting {

/// Axis-aligned decision stump: h(x) = polarity * (x[feature] <= threshold ? +1 : -1).
struct Stump {
    int feature = 0;
    double threshold = 0.0;
    int polarity = 1; // +1 or -1

    int predict(const features::BlockDescriptor& x) const {
        const int below = x[static_cast<size_t>(feature)] <= threshold ? 1 : -1;
        return polarity * below;
    }
};

struct WeightedStump {
    Stump stump;
    double alpha = 0.0;
};

struct StrongClassifier {
    int requested_rounds = 0; // T
    std::vector<WeightedStump> rounds;

    double score(const features::BlockDescriptor& x) const;
    /// sign(score) with sign(0) = -1.
    int predict(const features::BlockDescriptor& x) const { return score(x) > 0.0 ? 1 : -1; }
};

struct SampleOrigin {
    std::string volume;
    int slice = 0;
    int row = 0;
    int col = 0;
};

struct TrainingSet {
    std::vector<features::BlockDescriptor> x;
    std::vector<int> y; // -1 / +1
    std::vector<SampleOrigin> origin;

    size_t size() const { return x.size(); }
};

/// Per-round diagnostics; eps is the raw weighted error of the selected stump.
struct RoundInfo {
    int round = 0;       // 1-based
    double eps = 0.0;
    double alpha = 0.0;
    double train_err = 0.0;
    double exp_loss = 0.0;
    double weight_sum = 0.0; // after renormalization
};

using RoundObserver = std::function<void(const RoundInfo&)>;

/// Discrete AdaBoost over decision stumps. Thresholds are midpoints of
/// consecutive distinct per-feature values plus +-DBL_MAX sentinels; ties break
/// toward the lowest feature index, then the lowest threshold. Stops early when
/// the best weighted error reaches 0.5 (stump not recorded) or 0 (recorded).
StrongClassifier train_adaboost(const TrainingSet& data, int rounds,
                                std::vector<RoundInfo>* history = nullptr,
                                const RoundObserver& observer = {});

// ---------------------------------------------------------------------------
// Label derivation and mask reconstruction
// ---------------------------------------------------------------------------

/// Erode each label id independently with a disk structuring element
/// (offsets dx^2+dy^2 <= radius^2); vacated pixels become background.
LabelMask erode_labels(const LabelMask& mask, int radius);

/// Block label: +1 iff strictly more than half the block's pixels carry any
/// muscle id; ties go negative.
std::vector<int> derive_block_labels(const LabelMask& mask, const preproc::BlockGrid& grid);

struct BlockPrediction {
    std::vector<double> score; // row-major over the grid
    std::vector<int> label;    // -1 / +1
};

BlockPrediction predict_blocks(const StrongClassifier& clf, const features::DescriptorGrid& desc);

/// Paint each +1 block's full footprint as label 1; trailing pixels stay 0.
LabelMask blocks_to_mask(const std::vector<int>& block_labels, const preproc::BlockGrid& grid,
                         int width, int height);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Model JSON: { "T": int, "rounds": [{"f": int, "thr": float, "pol": +-1, "alpha": float}] }.
void save_model(const StrongClassifier& clf, const std::string& path);
StrongClassifier load_model(const std::string& path);

/// Training report CSV: t,eps,alpha,train_err,exp_loss.
void save_training_report(const std::vector<RoundInfo>& history, const std::string& path);

} // namespace museg::boosting
