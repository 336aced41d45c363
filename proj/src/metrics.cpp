#include "museg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <tuple>

#include "museg/atlas.hpp"
#include "museg/boosting.hpp"
#include "museg/features.hpp"
#include "museg/pipeline.hpp"
#include "museg/preproc.hpp"

namespace fs = std::filesystem;

namespace museg::metrics {

ConfusionCounts confusion(const LabelMask& pred, const LabelMask& truth) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw DataError("confusion: dimension mismatch");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.labels.size(); ++i) {
        const bool p = pred.labels[i] > 0;
        const bool t = truth.labels[i] > 0;
        if (p && t)
            ++c.tp;
        else if (p && !t)
            ++c.fp;
        else if (!p && t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

namespace {

double safe_ratio(std::int64_t num, std::int64_t den, std::int64_t other) {
    if (den == 0) return other == 0 ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

double recall(const ConfusionCounts& c) { return safe_ratio(c.tp, c.tp + c.fn, c.tp + c.fp); }

double precision(const ConfusionCounts& c) { return safe_ratio(c.tp, c.tp + c.fp, c.tp + c.fn); }

double dice(const LabelMask& pred, const LabelMask& truth) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw DataError("dice: dimension mismatch");
    std::int64_t a = 0, b = 0, inter = 0;
    for (size_t i = 0; i < pred.labels.size(); ++i) {
        const bool p = pred.labels[i] > 0;
        const bool t = truth.labels[i] > 0;
        a += p;
        b += t;
        inter += p && t;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

double dice_from_counts(const ConfusionCounts& c) {
    const std::int64_t den = 2 * c.tp + c.fp + c.fn;
    if (den == 0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
}

double dice_for_label(const LabelMask& pred, const LabelMask& truth, int label) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw DataError("dice: dimension mismatch");
    std::int64_t a = 0, b = 0, inter = 0;
    for (size_t i = 0; i < pred.labels.size(); ++i) {
        const bool p = pred.labels[i] == label;
        const bool t = truth.labels[i] == label;
        a += p;
        b += t;
        inter += p && t;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

struct Running {
    double sum = 0.0, sum_sq = 0.0;
    int n = 0;
    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    double mean() const { return n ? sum / n : 0.0; }
    double stddev() const { // sample std, 0 for n <= 1
        if (n <= 1) return 0.0;
        const double m = mean();
        return std::sqrt(std::max(0.0, (sum_sq - n * m * m) / (n - 1)));
    }
};

} // namespace

std::vector<VolumeSummary> summarize(const std::vector<SliceScore>& slices) {
    std::map<std::string, std::array<Running, 3>> per_volume;
    std::array<Running, 3> all;
    for (const auto& s : slices) {
        auto& r = per_volume[s.volume];
        r[0].add(s.recall);
        r[1].add(s.precision);
        r[2].add(s.dice);
        all[0].add(s.recall);
        all[1].add(s.precision);
        all[2].add(s.dice);
    }
    std::vector<VolumeSummary> out;
    for (const auto& [vol, r] : per_volume)
        out.push_back({vol, r[0].mean(), r[0].stddev(), r[1].mean(), r[1].stddev(), r[2].mean(),
                       r[2].stddev()});
    if (!slices.empty())
        out.push_back({"ALL", all[0].mean(), all[0].stddev(), all[1].mean(), all[1].stddev(),
                       all[2].mean(), all[2].stddev()});
    return out;
}

double EvalReport::mean_labeled_dice() const {
    if (labeled.empty()) return 0.0;
    double s = 0.0;
    for (const auto& l : labeled) s += l.dice;
    return s / static_cast<double>(labeled.size());
}

void save_report(const EvalReport& report, const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "report.csv", std::ios::binary);
        if (!out) throw DataError("cannot write report in '" + dir + "'");
        out << "volume,slice,recall,precision,dice\n";
        for (const auto& s : report.slices)
            out << s.volume << ',' << s.slice << ',' << fmt_g(s.recall) << ','
                << fmt_g(s.precision) << ',' << fmt_g(s.dice) << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "summary.csv", std::ios::binary);
        out << "volume,metric,mean,std\n";
        for (const auto& v : report.summary) {
            out << v.volume << ",recall," << fmt_g(v.mean_recall) << ',' << fmt_g(v.std_recall)
                << "\n";
            out << v.volume << ",precision," << fmt_g(v.mean_precision) << ','
                << fmt_g(v.std_precision) << "\n";
            out << v.volume << ",dice," << fmt_g(v.mean_dice) << ',' << fmt_g(v.std_dice) << "\n";
        }
    }
    {
        std::ofstream out(fs::path(dir) / "labeled.csv", std::ios::binary);
        out << "volume,slice,muscle,dice\n";
        for (const auto& l : report.labeled)
            out << l.volume << ',' << l.slice << ',' << l.muscle << ',' << fmt_g(l.dice) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Leave-one-volume-out cross-validation
// ---------------------------------------------------------------------------

EvalReport cross_validate(const imgio::DatasetManifest& manifest, const RunConfig& cfg,
                          const std::string& out_dir) {
    validate_config(cfg);
    if (manifest.volumes.size() < 2)
        throw DataError("cross-validation needs at least 2 volumes");

    // Load every slice once; descriptors are shared across folds.
    const std::vector<pipeline::Slice> slices = pipeline::load_slices(manifest, cfg, {}, {}, true);
    std::vector<std::string> volume_ids;
    for (const auto& vol : manifest.volumes) volume_ids.push_back(vol.id);

    if (!out_dir.empty()) fs::create_directories(out_dir);

    EvalReport report;
    for (const std::string& held_out : volume_ids) {
        std::vector<const pipeline::Slice*> train, test;
        for (const auto& s : slices) (s.volume == held_out ? test : train).push_back(&s);
        if (train.empty() || test.empty()) continue;

        // Block labels come from the eroded ground truth; evaluation below
        // uses the full-resolution original.
        const boosting::TrainingSet ts = pipeline::make_training_set(train, cfg.erosion_radius);
        std::vector<boosting::RoundInfo> history;
        const boosting::StrongClassifier clf = boosting::train_adaboost(ts, cfg.rounds, &history);

        // Atlas from the same training slices; the reference policy is the
        // configured index or a seeded pick (stable per held-out volume id).
        const atlas::MuscleAtlas muscle_atlas = pipeline::build_atlas_seeded(train, cfg, held_out);

        const std::string fold_dir =
            out_dir.empty() ? std::string{} : (fs::path(out_dir) / ("fold_" + held_out)).string();
        if (!fold_dir.empty()) {
            fs::create_directories(fs::path(fold_dir) / "pred");
            boosting::save_model(clf, (fs::path(fold_dir) / "model.json").string());
            boosting::save_training_report(history,
                                           (fs::path(fold_dir) / "training_report.csv").string());
            atlas::save_atlas(muscle_atlas, (fs::path(fold_dir) / "atlas").string());
        }

        for (const pipeline::Slice* s : test) {
            const std::string tag = pipeline::slice_tag(s->volume, s->index);
            const preproc::BlockGrid grid = preproc::grid_of(s->image);
            const boosting::BlockPrediction pred = boosting::predict_blocks(clf, s->descriptors);
            const LabelMask binary =
                boosting::blocks_to_mask(pred.label, grid, s->image.width, s->image.height);

            const ConfusionCounts c = confusion(binary, *s->mask);
            report.slices.push_back(
                {s->volume, s->index, recall(c), precision(c), dice_from_counts(c)});

            LabelMask labeled;
            bool have_labeled = false;
            try {
                labeled = atlas::label_segmentation(binary, s->image, muscle_atlas,
                                                    cfg.bone_params());
                have_labeled = true;
                for (const auto& [id, name] : s->mask->palette)
                    if (id > 0)
                        report.labeled.push_back(
                            {s->volume, s->index, id, dice_for_label(labeled, *s->mask, id)});
            } catch (const PipelineError& e) {
                std::fprintf(stderr, "warning: labeling failed for %s: %s\n", tag.c_str(),
                             e.what());
            }

            if (!fold_dir.empty()) {
                const std::string base = (fs::path(fold_dir) / "pred" / tag).string();
                imgio::save_mask(binary, base + "_binary.png");
                if (have_labeled) imgio::save_mask(labeled, base + "_labeled.png");
                if (cfg.write_overlays) {
                    imgio::save_overlay(s->image, binary, base + "_binary_overlay.png");
                    if (have_labeled)
                        imgio::save_overlay(s->image, labeled, base + "_labeled_overlay.png");
                }
            }
        }
    }

    std::sort(report.slices.begin(), report.slices.end(), [](const auto& a, const auto& b) {
        return a.volume < b.volume || (a.volume == b.volume && a.slice < b.slice);
    });
    std::sort(report.labeled.begin(), report.labeled.end(), [](const auto& a, const auto& b) {
        return std::tie(a.volume, a.slice, a.muscle) < std::tie(b.volume, b.slice, b.muscle);
    });
    report.summary = summarize(report.slices);
    if (!out_dir.empty()) save_report(report, out_dir);
    return report;
}

} // namespace museg::metrics
