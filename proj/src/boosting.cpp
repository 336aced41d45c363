#include "museg/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

using nlohmann::json;

namespace museg::boosting {

double StrongClassifier::score(const features::BlockDescriptor& x) const {
    double s = 0.0;
    for (const auto& r : rounds) s += r.alpha * r.stump.predict(x);
    return s;
}

// ---------------------------------------------------------------------------
// Morphology / label derivation
// ---------------------------------------------------------------------------

LabelMask erode_labels(const LabelMask& mask, int radius) {
    if (radius < 0) throw DataError("erosion radius must be >= 0");
    if (radius == 0) return mask;

    std::vector<std::pair<int, int>> disk;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) disk.emplace_back(dx, dy);

    LabelMask out(mask.width, mask.height);
    out.palette = mask.palette;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            const std::uint8_t id = mask.at(x, y);
            if (id == 0) continue;
            bool keep = true;
            for (const auto& [dx, dy] : disk) {
                const int sx = x + dx, sy = y + dy;
                // outside the image counts as background
                if (!mask.in_bounds(sx, sy) || mask.at(sx, sy) != id) {
                    keep = false;
                    break;
                }
            }
            if (keep) out.at(x, y) = id;
        }
    return out;
}

std::vector<int> derive_block_labels(const LabelMask& mask, const preproc::BlockGrid& grid) {
    const int b = grid.block_size;
    if (mask.width < grid.covered_width() || mask.height < grid.covered_height())
        throw DataError("mask does not cover the block grid");

    std::vector<int> labels(static_cast<size_t>(grid.rows) * grid.cols);
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            int muscle = 0;
            for (int y = r * b; y < (r + 1) * b; ++y)
                for (int x = c * b; x < (c + 1) * b; ++x)
                    if (mask.at(x, y) > 0) ++muscle;
            // strict majority; a tie is assumed negative
            labels[static_cast<size_t>(r) * grid.cols + c] = 2 * muscle > b * b ? 1 : -1;
        }
    return labels;
}

// ---------------------------------------------------------------------------
// AdaBoost
// ---------------------------------------------------------------------------

namespace {

constexpr double kEpsClamp = 1e-10;
constexpr double kSentinel = std::numeric_limits<double>::max();

// Errors within this of the running best are ties; scanning features and
// thresholds in ascending order (polarity +1 first) then keeps the first,
// which pins tie-breaking to the lowest feature index / lowest threshold.
constexpr double kTieTolerance = 1e-12;

struct BestStump {
    double eps = std::numeric_limits<double>::infinity();
    Stump stump;
};

// Scan one presorted feature for the threshold/polarity minimizing the
// weighted error. Candidates are midpoints of consecutive distinct values
// bracketed by +-DBL_MAX sentinels. Both polarity errors are built from the
// same running sums (never as 1 - other) so that flipping every label swaps
// them bit-exactly.
void scan_feature(int feature, const std::vector<double>& values,
                  const std::vector<std::uint32_t>& order, const std::vector<double>& w,
                  const std::vector<int>& y, double wpos_total, double wneg_total,
                  BestStump& best) {
    const size_t n = order.size();
    double wpos_below = 0.0, wneg_below = 0.0;

    auto consider = [&](double thr, double wpos_b, double wneg_b) {
        // polarity +1 predicts +1 at or below thr: wrong negatives below it
        // plus wrong positives above it
        const double err_plus = std::max(0.0, wneg_b + (wpos_total - wpos_b));
        if (err_plus < best.eps - kTieTolerance)
            best.eps = err_plus, best.stump = {feature, thr, +1};
        const double err_minus = std::max(0.0, wpos_b + (wneg_total - wneg_b));
        if (err_minus < best.eps - kTieTolerance)
            best.eps = err_minus, best.stump = {feature, thr, -1};
    };

    consider(-kSentinel, 0.0, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const std::uint32_t s = order[i];
        if (y[s] > 0)
            wpos_below += w[s];
        else
            wneg_below += w[s];
        const double v = values[i];
        if (i + 1 < n && values[i + 1] == v) continue; // same value group
        if (i + 1 < n)
            consider(0.5 * (v + values[i + 1]), wpos_below, wneg_below);
        else
            consider(kSentinel, wpos_below, wneg_below);
    }
}

} // namespace

StrongClassifier train_adaboost(const TrainingSet& data, int rounds,
                                std::vector<RoundInfo>* history, const RoundObserver& observer) {
    const size_t n = data.size();
    if (n < 2) throw DataError("training set needs at least 2 samples");
    if (data.y.size() != n) throw DataError("feature/label count mismatch");
    bool has_pos = false, has_neg = false;
    for (int label : data.y) {
        if (label > 0)
            has_pos = true;
        else
            has_neg = true;
    }
    if (!has_pos || !has_neg) throw DataError("training set must contain both classes");

    const int nf = features::kDescriptorLength;

    // Feature-major copies + per-feature sort orders (stable: ties keep sample
    // order, so scans are deterministic).
    std::vector<std::vector<double>> sorted_values(static_cast<size_t>(nf));
    std::vector<std::vector<std::uint32_t>> orders(static_cast<size_t>(nf));
    {
        std::vector<double> column(n);
        for (int f = 0; f < nf; ++f) {
            for (size_t i = 0; i < n; ++i) {
                const double v = data.x[i][static_cast<size_t>(f)];
                if (!std::isfinite(v)) throw DataError("non-finite feature value");
                column[i] = v;
            }
            auto& ord = orders[static_cast<size_t>(f)];
            ord.resize(n);
            std::iota(ord.begin(), ord.end(), 0u);
            std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
                return column[a] < column[b];
            });
            auto& vals = sorted_values[static_cast<size_t>(f)];
            vals.resize(n);
            for (size_t i = 0; i < n; ++i) vals[i] = column[ord[i]];
        }
    }

    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<double> score(n, 0.0);

    StrongClassifier clf;
    clf.requested_rounds = rounds;

    for (int t = 1; t <= rounds; ++t) {
        double wpos_total = 0.0, wneg_total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if (data.y[i] > 0)
                wpos_total += w[i];
            else
                wneg_total += w[i];
        }

        BestStump best;
        for (int f = 0; f < nf; ++f)
            scan_feature(f, sorted_values[static_cast<size_t>(f)],
                         orders[static_cast<size_t>(f)], w, data.y, wpos_total, wneg_total, best);

        if (best.eps >= 0.5) break; // no useful stump left

        const double eps_hat = std::clamp(best.eps, kEpsClamp, 1.0 - kEpsClamp);
        const double alpha = 0.5 * std::log((1.0 - eps_hat) / eps_hat);
        clf.rounds.push_back({best.stump, alpha});

        double wsum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const int h = best.stump.predict(data.x[i]);
            w[i] *= std::exp(-alpha * data.y[i] * h);
            score[i] += alpha * h;
            wsum += w[i];
        }
        for (double& wi : w) wi /= wsum;

        if (history || observer) {
            RoundInfo info;
            info.round = t;
            info.eps = best.eps;
            info.alpha = alpha;
            int miss = 0;
            double loss = 0.0;
            double check = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const int pred = score[i] > 0.0 ? 1 : -1;
                if (pred != data.y[i]) ++miss;
                loss += std::exp(-data.y[i] * score[i]);
                check += w[i];
            }
            info.train_err = static_cast<double>(miss) / static_cast<double>(n);
            info.exp_loss = loss / static_cast<double>(n);
            info.weight_sum = check;
            if (history) history->push_back(info);
            if (observer) observer(info);
        }

        if (best.eps <= 0.0) break; // perfect stump, recorded above
    }
    return clf;
}

BlockPrediction predict_blocks(const StrongClassifier& clf,
                               const features::DescriptorGrid& desc) {
    BlockPrediction out;
    out.score.reserve(desc.blocks.size());
    out.label.reserve(desc.blocks.size());
    for (const auto& d : desc.blocks) {
        const double s = clf.score(d);
        out.score.push_back(s);
        out.label.push_back(s > 0.0 ? 1 : -1);
    }
    return out;
}

LabelMask blocks_to_mask(const std::vector<int>& block_labels, const preproc::BlockGrid& grid,
                         int width, int height) {
    if (block_labels.size() != static_cast<size_t>(grid.rows) * grid.cols)
        throw DataError("block label count does not match grid");
    if (width < grid.covered_width() || height < grid.covered_height())
        throw DataError("grid does not fit in the requested dimensions");

    LabelMask out(width, height);
    const int b = grid.block_size;
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            if (block_labels[static_cast<size_t>(r) * grid.cols + c] <= 0) continue;
            for (int y = r * b; y < (r + 1) * b; ++y)
                for (int x = c * b; x < (c + 1) * b; ++x) out.at(x, y) = 1;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void save_model(const StrongClassifier& clf, const std::string& path) {
    json j;
    j["T"] = clf.requested_rounds;
    j["rounds"] = json::array();
    for (const auto& r : clf.rounds)
        j["rounds"].push_back({{"f", r.stump.feature},
                               {"thr", r.stump.threshold},
                               {"pol", r.stump.polarity},
                               {"alpha", r.alpha}});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model '" + path + "'");
    out << j.dump(2) << "\n";
}

StrongClassifier load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing model '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("model '" + path + "': " + e.what());
    }
    StrongClassifier clf;
    clf.requested_rounds = j.at("T").get<int>();
    for (const auto& jr : j.at("rounds")) {
        WeightedStump r;
        r.stump.feature = jr.at("f").get<int>();
        r.stump.threshold = jr.at("thr").get<double>();
        r.stump.polarity = jr.at("pol").get<int>();
        r.alpha = jr.at("alpha").get<double>();
        if (r.stump.feature < 0 || r.stump.feature >= features::kDescriptorLength ||
            (r.stump.polarity != 1 && r.stump.polarity != -1))
            throw DataError("model '" + path + "': invalid stump");
        clf.rounds.push_back(r);
    }
    return clf;
}

void save_training_report(const std::vector<RoundInfo>& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write training report '" + path + "'");
    out << "t,eps,alpha,train_err,exp_loss\n";
    for (const auto& r : history)
        out << r.round << ',' << fmt_g(r.eps) << ',' << fmt_g(r.alpha) << ','
            << fmt_g(r.train_err) << ',' << fmt_g(r.exp_loss) << "\n";
}

} // namespace museg::boosting
