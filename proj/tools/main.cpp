// museg — texture-based skeletal muscle segmentation for 2-D grayscale slices.
//
// Subcommands cover the pipeline stages: phantom data generation, feature
// extraction, AdaBoost training, binary prediction, atlas construction,
// muscle labeling, evaluation, and leave-one-volume-out cross-validation.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 pipeline failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "museg/atlas.hpp"
#include "museg/boosting.hpp"
#include "museg/common.hpp"
#include "museg/config.hpp"
#include "museg/imgio.hpp"
#include "museg/metrics.hpp"
#include "museg/phantom.hpp"
#include "museg/pipeline.hpp"
#include "museg/preproc.hpp"

namespace fs = std::filesystem;
using namespace museg;

namespace {

struct ConfigCli {
    std::string config_path;
    CLI::Option* opt_seed = nullptr;
    CLI::Option* opt_rounds = nullptr;
    CLI::Option* opt_erosion = nullptr;
    CLI::Option* opt_log_sigma = nullptr;
    CLI::Option* opt_log_size = nullptr;
    CLI::Option* opt_bone_min = nullptr;
    CLI::Option* opt_bone_max = nullptr;
    CLI::Option* opt_atlas_ref = nullptr;
    CLI::Option* opt_overlays = nullptr;
    std::uint64_t seed = 0;
    int rounds = 0, erosion = 0, log_size = 0, bone_min = 0, bone_max = 0, atlas_ref = 0;
    double log_sigma = 0.0;
    bool overlays = true;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config JSON (defaults when absent)");
        opt_seed = cmd->add_option("--seed", seed, "RNG seed override");
        opt_rounds = cmd->add_option("--rounds", rounds, "AdaBoost rounds override");
        opt_erosion = cmd->add_option("--erosion-radius", erosion, "label erosion radius");
        opt_log_sigma = cmd->add_option("--log-sigma", log_sigma, "LoG sigma");
        opt_log_size = cmd->add_option("--log-size", log_size, "LoG kernel size");
        opt_bone_min = cmd->add_option("--bone-area-min", bone_min, "bone component min area");
        opt_bone_max = cmd->add_option("--bone-area-max", bone_max, "bone component max area");
        opt_atlas_ref =
            cmd->add_option("--atlas-reference", atlas_ref, "atlas reference index (-1 seeded)");
        opt_overlays = cmd->add_flag("--overlays,!--no-overlays", overlays, "write overlay PNGs");
    }

    RunConfig resolve() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (opt_seed->count()) cfg.seed = seed;
        if (opt_rounds->count()) cfg.rounds = rounds;
        if (opt_erosion->count()) cfg.erosion_radius = erosion;
        if (opt_log_sigma->count()) cfg.log_sigma = log_sigma;
        if (opt_log_size->count()) cfg.log_size = log_size;
        if (opt_bone_min->count()) cfg.bone_area_min = bone_min;
        if (opt_bone_max->count()) cfg.bone_area_max = bone_max;
        if (opt_atlas_ref->count()) cfg.atlas_reference = atlas_ref;
        if (opt_overlays->count()) cfg.write_overlays = overlays;
        validate_config(cfg);
        return cfg;
    }
};

RunConfig echo_config(const ConfigCli& cli, const std::string& out_dir) {
    RunConfig cfg = cli.resolve();
    fs::create_directories(out_dir);
    save_config(cfg, (fs::path(out_dir) / "config.json").string());
    return cfg;
}

void write_feature_csv(const std::vector<pipeline::Slice>& slices, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "volume,slice,row,col";
    for (int f = 0; f < features::kDescriptorLength; ++f) {
        char col[8];
        std::snprintf(col, sizeof(col), ",f%02d", f);
        out << col;
    }
    out << "\n";
    for (const auto& s : slices)
        for (int r = 0; r < s.descriptors.rows; ++r)
            for (int c = 0; c < s.descriptors.cols; ++c) {
                out << s.volume << ',' << s.index << ',' << r << ',' << c;
                for (double v : s.descriptors.at(r, c)) out << ',' << fmt_g(v);
                out << "\n";
            }
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

void cmd_phantom(const std::string& spec_path, const std::string& out_dir, int volumes_override,
                 std::uint64_t seed_override, bool has_seed) {
    phantom::PhantomSpec spec =
        spec_path.empty() ? phantom::PhantomSpec{} : phantom::load_spec(spec_path);
    if (has_seed) spec.seed = seed_override;
    int volumes = volumes_override;
    if (volumes <= 0) {
        volumes = 10;
        if (!spec_path.empty()) { // optional dataset-level field
            std::ifstream in(spec_path);
            auto j = nlohmann::json::parse(in);
            if (j.contains("volumes")) volumes = j["volumes"].get<int>();
        }
    }
    fs::create_directories(out_dir);
    phantom::save_spec(spec, (fs::path(out_dir) / "spec.json").string());
    phantom::generate_dataset(spec, volumes, out_dir);
    std::printf("wrote %d volumes x %d slices under %s\n", volumes, spec.slices_per_volume,
                out_dir.c_str());
}

void cmd_features(const std::string& manifest_path, const std::string& out_dir,
                  const ConfigCli& cli) {
    const RunConfig cfg = echo_config(cli, out_dir);
    const auto manifest = imgio::load_manifest(manifest_path);
    const auto slices = pipeline::load_slices(manifest, cfg);
    write_feature_csv(slices, (fs::path(out_dir) / "features.csv").string());
}

void cmd_train(const std::string& manifest_path, const std::string& out_dir,
               const std::string& exclude, const ConfigCli& cli) {
    const RunConfig cfg = echo_config(cli, out_dir);
    const auto manifest = imgio::load_manifest(manifest_path);
    const auto slices = pipeline::load_slices(manifest, cfg, exclude, {}, true);
    if (slices.empty()) throw DataError("no training slices selected");
    const auto ts = pipeline::make_training_set(pipeline::slice_ptrs(slices),
                                                cfg.erosion_radius);
    std::vector<boosting::RoundInfo> history;
    const auto clf = boosting::train_adaboost(ts, cfg.rounds, &history);
    boosting::save_model(clf, (fs::path(out_dir) / "model.json").string());
    boosting::save_training_report(history, (fs::path(out_dir) / "training_report.csv").string());
    std::printf("trained %zu rounds on %zu blocks\n", clf.rounds.size(), ts.size());
}

void cmd_predict(const std::string& model_path, const std::string& manifest_path,
                 const std::string& out_dir, const std::string& only, const ConfigCli& cli) {
    const RunConfig cfg = echo_config(cli, out_dir);
    const auto clf = boosting::load_model(model_path);
    const auto manifest = imgio::load_manifest(manifest_path);
    const auto slices = pipeline::load_slices(manifest, cfg, {}, only);
    if (slices.empty()) throw DataError("no slices selected for prediction");
    for (const auto& s : slices) {
        const auto grid = preproc::grid_of(s.image);
        const auto pred = boosting::predict_blocks(clf, s.descriptors);
        const LabelMask binary =
            boosting::blocks_to_mask(pred.label, grid, s.image.width, s.image.height);
        const std::string base =
            (fs::path(out_dir) / pipeline::slice_tag(s.volume, s.index)).string();
        imgio::save_mask(binary, base + "_binary.png");
        if (cfg.write_overlays) imgio::save_overlay(s.image, binary, base + "_binary_overlay.png");
    }
}

void cmd_atlas(const std::string& manifest_path, const std::string& out_dir,
               const std::string& exclude, const ConfigCli& cli) {
    const RunConfig cfg = echo_config(cli, out_dir);
    const auto manifest = imgio::load_manifest(manifest_path);
    const auto slices = pipeline::load_slices(manifest, cfg, exclude, {}, true);
    if (slices.size() < 2) throw DataError("atlas needs at least 2 contributor slices");
    const auto atlas_ = pipeline::build_atlas_seeded(pipeline::slice_ptrs(slices), cfg, "atlas");
    atlas::save_atlas(atlas_, out_dir);
}

void cmd_label(const std::string& pred_dir, const std::string& atlas_dir,
               const std::string& manifest_path, const std::string& out_dir,
               const std::string& only, const ConfigCli& cli) {
    const RunConfig cfg = echo_config(cli, out_dir);
    const auto manifest = imgio::load_manifest(manifest_path);
    const auto atlas_ = atlas::load_atlas(atlas_dir);
    const auto slices = pipeline::load_slices(manifest, cfg, {}, only);
    int done = 0;
    for (const auto& s : slices) {
        const std::string tag = pipeline::slice_tag(s.volume, s.index);
        const fs::path binary_path = fs::path(pred_dir) / (tag + "_binary.png");
        if (!fs::exists(binary_path)) continue;
        const LabelMask binary = imgio::load_mask(binary_path.string());
        const std::string base = (fs::path(out_dir) / tag).string();
        try {
            const LabelMask labeled =
                atlas::label_segmentation(binary, s.image, atlas_, cfg.bone_params());
            imgio::save_mask(labeled, base + "_labeled.png");
            if (cfg.write_overlays)
                imgio::save_overlay(s.image, labeled, base + "_labeled_overlay.png");
            ++done;
        } catch (const PipelineError& e) {
            // fall back to the unlabeled binary so the slice still ships
            std::fprintf(stderr, "warning: labeling failed for %s (%s); emitting binary mask\n",
                         tag.c_str(), e.what());
            imgio::save_mask(binary, base + "_labeled.png");
        }
    }
    if (done == 0) throw DataError("no binary masks found under '" + pred_dir + "'");
}

void cmd_eval(const std::string& pred_dir, const std::string& manifest_path,
              const std::string& out_dir, const std::string& only, const ConfigCli& cli) {
    echo_config(cli, out_dir);
    const auto manifest = imgio::load_manifest(manifest_path);
    metrics::EvalReport report;
    int found = 0;
    for (const auto& vol : manifest.volumes) {
        if (!only.empty() && vol.id != only) continue;
        for (const auto& entry : vol.slices) {
            if (!entry.mask) continue;
            auto [img, mask] = imgio::load_slice(manifest, entry);
            const std::string tag = pipeline::slice_tag(vol.id, entry.index);
            const fs::path binary_path = fs::path(pred_dir) / (tag + "_binary.png");
            if (fs::exists(binary_path)) {
                ++found;
                const LabelMask pred = imgio::load_mask(binary_path.string());
                const auto c = metrics::confusion(pred, *mask);
                report.slices.push_back({vol.id, entry.index, metrics::recall(c),
                                         metrics::precision(c), metrics::dice_from_counts(c)});
            }
            const fs::path labeled_path = fs::path(pred_dir) / (tag + "_labeled.png");
            if (fs::exists(labeled_path)) {
                const LabelMask labeled = imgio::load_mask(labeled_path.string());
                for (const auto& [id, name] : mask->palette)
                    if (id > 0)
                        report.labeled.push_back(
                            {vol.id, entry.index, id, metrics::dice_for_label(labeled, *mask, id)});
            }
        }
    }
    if (found == 0) throw DataError("no predictions matching the manifest in '" + pred_dir + "'");
    report.summary = metrics::summarize(report.slices);
    metrics::save_report(report, out_dir);
}

void cmd_crossval(const std::string& manifest_path, const std::string& out_dir,
                  const ConfigCli& cli) {
    const RunConfig cfg = echo_config(cli, out_dir);
    const auto manifest = imgio::load_manifest(manifest_path);
    const auto report = metrics::cross_validate(manifest, cfg, out_dir);
    for (const auto& v : report.summary)
        std::printf("%s: recall %.4f +- %.4f, precision %.4f +- %.4f, dice %.4f +- %.4f\n",
                    v.volume.c_str(), v.mean_recall, v.std_recall, v.mean_precision,
                    v.std_precision, v.mean_dice, v.std_dice);
    if (!report.labeled.empty())
        std::printf("mean per-muscle labeled dice: %.4f\n", report.mean_labeled_dice());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"texture-based skeletal muscle segmentation"};
    app.require_subcommand(1);

    std::string spec_path, manifest_path, out_dir, model_path, pred_dir, atlas_dir;
    std::string exclude_volume, only_volume;
    int volumes = 0;
    std::uint64_t phantom_seed = 0;

    auto* p_phantom = app.add_subcommand("phantom", "generate a synthetic dataset");
    p_phantom->add_option("--spec", spec_path, "phantom spec JSON");
    p_phantom->add_option("--out", out_dir, "output directory")->required();
    p_phantom->add_option("--volumes", volumes, "number of volumes");
    auto* p_phantom_seed = p_phantom->add_option("--seed", phantom_seed, "base seed override");

    ConfigCli cfg_features, cfg_train, cfg_predict, cfg_atlas, cfg_label, cfg_eval, cfg_crossval;

    auto* p_features = app.add_subcommand("features", "dump per-block descriptors to CSV");
    p_features->add_option("--manifest", manifest_path, "dataset manifest")->required();
    p_features->add_option("--out", out_dir, "output directory")->required();
    cfg_features.attach(p_features);

    auto* p_train = app.add_subcommand("train", "train the AdaBoost block classifier");
    p_train->add_option("--manifest", manifest_path, "dataset manifest")->required();
    p_train->add_option("--out", out_dir, "output directory")->required();
    p_train->add_option("--exclude-volume", exclude_volume, "volume id to hold out");
    cfg_train.attach(p_train);

    auto* p_predict = app.add_subcommand("predict", "write binary muscle masks");
    p_predict->add_option("--model", model_path, "model JSON")->required();
    p_predict->add_option("--manifest", manifest_path, "dataset manifest")->required();
    p_predict->add_option("--out", out_dir, "output directory")->required();
    p_predict->add_option("--only-volume", only_volume, "restrict to one volume id");
    cfg_predict.attach(p_predict);

    auto* p_atlas = app.add_subcommand("atlas", "build the probabilistic muscle atlas");
    p_atlas->add_option("--manifest", manifest_path, "dataset manifest")->required();
    p_atlas->add_option("--out", out_dir, "output directory")->required();
    p_atlas->add_option("--exclude-volume", exclude_volume, "volume id to hold out");
    cfg_atlas.attach(p_atlas);

    auto* p_label = app.add_subcommand("label", "assign muscle labels to binary masks");
    p_label->add_option("--pred", pred_dir, "directory with *_binary.png masks")->required();
    p_label->add_option("--atlas", atlas_dir, "atlas directory")->required();
    p_label->add_option("--manifest", manifest_path, "dataset manifest")->required();
    p_label->add_option("--out", out_dir, "output directory")->required();
    p_label->add_option("--only-volume", only_volume, "restrict to one volume id");
    cfg_label.attach(p_label);

    auto* p_eval = app.add_subcommand("eval", "score predictions against ground truth");
    p_eval->add_option("--pred", pred_dir, "directory with predicted masks")->required();
    p_eval->add_option("--manifest", manifest_path, "dataset manifest")->required();
    p_eval->add_option("--out", out_dir, "output directory")->required();
    p_eval->add_option("--only-volume", only_volume, "restrict to one volume id");
    cfg_eval.attach(p_eval);

    auto* p_crossval = app.add_subcommand("crossval", "leave-one-volume-out cross-validation");
    p_crossval->add_option("--manifest", manifest_path, "dataset manifest")->required();
    p_crossval->add_option("--out", out_dir, "output directory")->required();
    cfg_crossval.attach(p_crossval);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1; // --help exits 0; any parse failure is a usage error
    }

    try {
        if (p_phantom->parsed())
            cmd_phantom(spec_path, out_dir, volumes, phantom_seed, p_phantom_seed->count() > 0);
        else if (p_features->parsed())
            cmd_features(manifest_path, out_dir, cfg_features);
        else if (p_train->parsed())
            cmd_train(manifest_path, out_dir, exclude_volume, cfg_train);
        else if (p_predict->parsed())
            cmd_predict(model_path, manifest_path, out_dir, only_volume, cfg_predict);
        else if (p_atlas->parsed())
            cmd_atlas(manifest_path, out_dir, exclude_volume, cfg_atlas);
        else if (p_label->parsed())
            cmd_label(pred_dir, atlas_dir, manifest_path, out_dir, only_volume, cfg_label);
        else if (p_eval->parsed())
            cmd_eval(pred_dir, manifest_path, out_dir, only_volume, cfg_eval);
        else if (p_crossval->parsed())
            cmd_crossval(manifest_path, out_dir, cfg_crossval);
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const PipelineError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
