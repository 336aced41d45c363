#include "museg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace museg::phantom {

Point2 PhantomSpec::bone_center() const {
    return {bone_center_x >= 0.0 ? bone_center_x : 0.5 * width,
            bone_center_y >= 0.0 ? bone_center_y : 0.547 * height};
}

Point2 PhantomSpec::muscle_center() const {
    return {muscle_center_x >= 0.0 ? muscle_center_x : 0.5 * width,
            muscle_center_y >= 0.0 ? muscle_center_y : 0.484 * height};
}

void validate_spec(const PhantomSpec& spec) {
    auto band_ok = [](const Band& b) { return b.lo >= 0.0 && b.hi <= 1.0 && b.lo <= b.hi; };
    if (spec.width < 64 || spec.height < 64) throw DataError("phantom: dims must be >= 64");
    if (spec.muscles < 2) throw DataError("phantom: need at least 2 muscle compartments");
    if (spec.slices_per_volume < 1) throw DataError("phantom: slices_per_volume must be >= 1");
    if (!band_ok(spec.bone_band) || !band_ok(spec.muscle_band) || !band_ok(spec.fat_band))
        throw DataError("phantom: intensity bands must lie within [0,1]");
    if (!(spec.bone_band.mid() < spec.muscle_band.mid() &&
          spec.muscle_band.mid() < spec.fat_band.mid()))
        throw DataError("phantom: bands must order bone < muscle < fat");
    if (spec.septa_level < 0.0 || spec.septa_level > 1.0 || spec.air_level < 0.0 ||
        spec.air_level > 1.0)
        throw DataError("phantom: septa/air levels must lie within [0,1]");
    if (spec.noise_variance < 0.0) throw DataError("phantom: negative noise variance");
    if (spec.jitter < 0.0) throw DataError("phantom: negative jitter");
    if (spec.subject_shift < 0.0) throw DataError("phantom: negative subject shift");
    if (spec.marrow_radius <= 0.0 || spec.marrow_radius >= spec.bone_radius)
        throw DataError("phantom: need 0 < marrow radius < bone radius");

    if (spec.lobe_amplitude < 0.0 || spec.lobe_amplitude > 0.6 || spec.lobe_width <= 0.0)
        throw DataError("phantom: bad distal lobe parameters");

    // Geometric feasibility: bone inside the muscle ellipse, the muscle body
    // inside the fat ellipse (the lobe may poke through the ring), everything
    // inside the frame, wedges wider than the septa at the bone rim.
    const Point2 bc = spec.bone_center();
    const Point2 mc = spec.muscle_center();
    const double off = norm(bc - mc);
    const double slack = 2.0 + spec.jitter + spec.subject_shift;
    if (off + spec.bone_radius + slack >= std::min(spec.muscle_axis_x, spec.muscle_axis_y))
        throw DataError("phantom: bone does not fit inside the muscle region");
    if (spec.muscle_axis_x + slack >= spec.fat_axis_x ||
        spec.muscle_axis_y + slack >= spec.fat_axis_y)
        throw DataError("phantom: muscle region does not fit inside the fat ring");
    if (spec.fat_axis_x + slack >= 0.5 * spec.width ||
        spec.fat_axis_y + slack >= 0.5 * spec.height)
        throw DataError("phantom: fat ring does not fit inside the frame");
    if (spec.muscle_axis_y * (1.0 + spec.lobe_amplitude) + slack + std::abs(mc.y - 0.5 * spec.height) >=
        0.5 * spec.height)
        throw DataError("phantom: distal lobe does not fit inside the frame");
    const double wedge_arc = 2.0 * M_PI / spec.muscles * spec.bone_radius;
    if (wedge_arc <= 4.0 * spec.septum_half_width)
        throw DataError("phantom: compartments cannot fit between the septa");
}

namespace {

// Tissue ids keying the per-(slice,tissue) noise streams.
enum Tissue : std::uint64_t { kAir = 0, kFat = 1, kBone = 2, kMarrow = 3, kSepta = 4, kMuscle0 = 8 };

constexpr std::uint64_t kGeometryTag = 0x47454F4DULL; // per-volume draws
constexpr std::uint64_t kNoiseTag = 0x4E4F4953ULL;

struct VolumeParams {
    double bone_base = 0.0, fat_base = 0.0, marrow_base = 0.0;
    std::vector<double> muscle_base;     // per compartment
    std::vector<double> striation_phase; // per compartment
    double shift_x = 0.0, shift_y = 0.0; // subject placement
    double axis_scale = 1.0;
    double wedge_offset = 0.0;
    // smooth per-slice motion: value = amp * sin(phase + s * freq)
    double phase_x = 0.0, freq_x = 0.0;
    double phase_y = 0.0, freq_y = 0.0;
    double phase_a = 0.0, freq_a = 0.0;
};

VolumeParams draw_volume_params(const PhantomSpec& spec) {
    Rng g(hash_combine(spec.seed, kGeometryTag));
    VolumeParams p;
    p.bone_base = g.uniform(spec.bone_band.lo, spec.bone_band.hi);
    p.fat_base = g.uniform(spec.fat_band.lo, spec.fat_band.hi);
    p.marrow_base = g.uniform(spec.fat_band.lo, spec.fat_band.hi);
    for (int k = 0; k < spec.muscles; ++k) {
        p.muscle_base.push_back(g.uniform(spec.muscle_band.lo, spec.muscle_band.hi));
        p.striation_phase.push_back(g.uniform(0.0, 2.0 * M_PI));
    }
    p.shift_x = g.uniform(-spec.subject_shift, spec.subject_shift);
    p.shift_y = g.uniform(-spec.subject_shift, spec.subject_shift);
    p.axis_scale = g.uniform(0.97, 1.03);
    p.wedge_offset = g.uniform(-0.05, 0.05);
    p.phase_x = g.uniform(0.0, 2.0 * M_PI);
    p.freq_x = g.uniform(0.2, 0.5);
    p.phase_y = g.uniform(0.0, 2.0 * M_PI);
    p.freq_y = g.uniform(0.2, 0.5);
    p.phase_a = g.uniform(0.0, 2.0 * M_PI);
    p.freq_a = g.uniform(0.2, 0.5);
    return p;
}

std::pair<GrayImage, LabelMask> generate_slice(const PhantomSpec& spec, const VolumeParams& p,
                                               int s) {
    const int w = spec.width, h = spec.height;
    const int K = spec.muscles;

    // Slice geometry: the per-volume placement plus smooth bounded drift.
    const double jx = p.shift_x + spec.jitter * 0.7 * std::sin(p.phase_x + s * p.freq_x);
    const double jy = p.shift_y + spec.jitter * 0.7 * std::sin(p.phase_y + s * p.freq_y);
    const double jang = spec.jitter / 120.0 * std::sin(p.phase_a + s * p.freq_a);

    const Point2 bone_c = spec.bone_center() + Point2{jx, jy};
    const Point2 muscle_c = spec.muscle_center() + Point2{jx, jy};
    const Point2 fat_c = Point2{0.5 * w, 0.5 * h} + Point2{jx, jy};
    const double max_x = spec.muscle_axis_x * p.axis_scale;
    const double max_y = spec.muscle_axis_y * p.axis_scale;
    const double fax = spec.fat_axis_x * p.axis_scale;
    const double fay = spec.fat_axis_y * p.axis_scale;
    // septa sit between wedges, away from the distal (top) direction
    const double base_offset = -M_PI / 2.0 + M_PI / K;
    const double wedge_offset = base_offset + p.wedge_offset + jang;
    const double sector_width = 2.0 * M_PI / K;
    // the distal lobe turns with the wedges
    const double lobe_dir = -M_PI / 2.0 + spec.lobe_angle + p.wedge_offset + jang;

    std::vector<Rng> noise;
    noise.reserve(static_cast<size_t>(kMuscle0) + K);
    for (std::uint64_t t = 0; t < kMuscle0 + static_cast<std::uint64_t>(K); ++t)
        noise.emplace_back(hash_combine(hash_combine(hash_combine(spec.seed, kNoiseTag),
                                                     static_cast<std::uint64_t>(s)),
                                        t));
    const double sigma = std::sqrt(spec.noise_variance);

    GrayImage img(w, h);
    LabelMask mask(w, h);
    for (int k = 1; k <= K; ++k) mask.palette[k] = "muscle_" + std::to_string(k);

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dxb = x - bone_c.x, dyb = y - bone_c.y;
            const double rb = std::sqrt(dxb * dxb + dyb * dyb);
            const double mex = (x - muscle_c.x) / max_x, mey = (y - muscle_c.y) / max_y;
            // normalized elliptical radius, allowed to exceed 1 inside the lobe
            const double rho = std::sqrt(mex * mex + mey * mey);
            double lobe_gain = 0.0;
            if (spec.lobe_amplitude > 0.0 && rho > 0.0) {
                double dphi = std::atan2(y - muscle_c.y, x - muscle_c.x) - lobe_dir;
                while (dphi > M_PI) dphi -= 2.0 * M_PI;
                while (dphi < -M_PI) dphi += 2.0 * M_PI;
                lobe_gain = spec.lobe_amplitude *
                            std::exp(-0.5 * dphi * dphi / (spec.lobe_width * spec.lobe_width));
            }
            const bool in_muscle_ellipse = rho <= 1.0 + lobe_gain;
            const double fex = (x - fat_c.x) / fax, fey = (y - fat_c.y) / fay;
            const bool in_fat_ellipse = fex * fex + fey * fey <= 1.0;

            double base;
            std::uint64_t tissue;
            int label = 0;
            if (rb <= spec.marrow_radius) {
                base = p.marrow_base;
                tissue = kMarrow;
            } else if (rb <= spec.bone_radius) {
                base = p.bone_base;
                tissue = kBone;
            } else if (in_muscle_ellipse) {
                // wedge index from the angle about the bone center
                const double ang = std::atan2(dyb, dxb);
                double rel = std::fmod(ang - wedge_offset, 2.0 * M_PI);
                if (rel < 0.0) rel += 2.0 * M_PI;
                const int k = std::min(K - 1, static_cast<int>(rel / sector_width));
                // distance (in pixels) to the nearest wedge boundary ray
                const double into = rel - k * sector_width;
                const double to_edge = std::min(into, sector_width - into) * rb;
                if (to_edge <= spec.septum_half_width) {
                    base = spec.septa_level;
                    tissue = kSepta;
                } else {
                    base = p.muscle_base[static_cast<size_t>(k)];
                    const double phi = base_offset + (k + 0.5) * sector_width;
                    base += spec.striation_amplitude *
                            std::sin(2.0 * M_PI * spec.striation_frequency *
                                         (x * std::cos(phi) + y * std::sin(phi)) +
                                     p.striation_phase[static_cast<size_t>(k)]);
                    tissue = kMuscle0 + static_cast<std::uint64_t>(k);
                    label = k + 1;
                }
            } else if (in_fat_ellipse) {
                base = p.fat_base;
                tissue = kFat;
            } else {
                base = spec.air_level;
                tissue = kAir;
            }

            const double s_noise = tissue == kAir ? sigma / 3.0 : sigma;
            const double v = base + s_noise * noise[static_cast<size_t>(tissue)].next_gaussian();
            img.at(x, y) = std::clamp(v, 0.0, 1.0);
            mask.at(x, y) = static_cast<std::uint8_t>(label);
        }
    return {std::move(img), std::move(mask)};
}

} // namespace

std::vector<std::pair<GrayImage, LabelMask>> generate_volume(const PhantomSpec& spec) {
    validate_spec(spec);
    const VolumeParams p = draw_volume_params(spec);
    std::vector<std::pair<GrayImage, LabelMask>> out;
    out.reserve(static_cast<size_t>(spec.slices_per_volume));
    for (int s = 0; s < spec.slices_per_volume; ++s) out.push_back(generate_slice(spec, p, s));
    return out;
}

imgio::DatasetManifest generate_dataset(const PhantomSpec& spec, int volumes,
                                        const std::string& out_dir) {
    if (volumes < 1) throw DataError("phantom: need at least 1 volume");
    validate_spec(spec);
    fs::create_directories(out_dir);

    imgio::DatasetManifest manifest;
    manifest.base_dir = out_dir;
    for (int v = 0; v < volumes; ++v) {
        PhantomSpec vol_spec = spec;
        vol_spec.seed = spec.seed ^ static_cast<std::uint64_t>(v);
        char volname[16];
        std::snprintf(volname, sizeof(volname), "vol%02d", v);
        fs::create_directories(fs::path(out_dir) / volname);

        imgio::VolumeEntry entry;
        entry.id = volname;
        const auto slices = generate_volume(vol_spec);
        for (int s = 0; s < static_cast<int>(slices.size()); ++s) {
            char img_name[32], mask_name[32];
            std::snprintf(img_name, sizeof(img_name), "%s/slice%03d.png", volname, s);
            std::snprintf(mask_name, sizeof(mask_name), "%s/slice%03d_mask.png", volname, s);
            imgio::save_image(slices[static_cast<size_t>(s)].first,
                              (fs::path(out_dir) / img_name).string(), 16);
            imgio::save_mask(slices[static_cast<size_t>(s)].second,
                             (fs::path(out_dir) / mask_name).string());
            entry.slices.push_back({s, img_name, mask_name});
        }
        manifest.volumes.push_back(std::move(entry));
    }
    imgio::save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

// ---------------------------------------------------------------------------
// Spec JSON
// ---------------------------------------------------------------------------

namespace {

void read_band(const json& j, const char* key, Band& band) {
    if (!j.contains(key)) return;
    band.lo = j.at(key).at(0).get<double>();
    band.hi = j.at(key).at(1).get<double>();
}

template <typename T>
void read_field(const json& j, const char* key, T& value) {
    if (j.contains(key)) value = j.at(key).get<T>();
}

} // namespace

PhantomSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing phantom spec '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("phantom spec '" + path + "': " + e.what());
    }

    PhantomSpec spec;
    read_field(j, "seed", spec.seed);
    read_field(j, "width", spec.width);
    read_field(j, "height", spec.height);
    read_field(j, "muscles", spec.muscles);
    read_field(j, "slices_per_volume", spec.slices_per_volume);
    read_band(j, "bone_band", spec.bone_band);
    read_band(j, "muscle_band", spec.muscle_band);
    read_band(j, "fat_band", spec.fat_band);
    read_field(j, "septa_level", spec.septa_level);
    read_field(j, "air_level", spec.air_level);
    read_field(j, "noise_variance", spec.noise_variance);
    read_field(j, "striation_frequency", spec.striation_frequency);
    read_field(j, "striation_amplitude", spec.striation_amplitude);
    read_field(j, "jitter", spec.jitter);
    read_field(j, "subject_shift", spec.subject_shift);
    read_field(j, "bone_center_x", spec.bone_center_x);
    read_field(j, "bone_center_y", spec.bone_center_y);
    read_field(j, "bone_radius", spec.bone_radius);
    read_field(j, "marrow_radius", spec.marrow_radius);
    read_field(j, "muscle_center_x", spec.muscle_center_x);
    read_field(j, "muscle_center_y", spec.muscle_center_y);
    read_field(j, "muscle_axis_x", spec.muscle_axis_x);
    read_field(j, "muscle_axis_y", spec.muscle_axis_y);
    read_field(j, "fat_axis_x", spec.fat_axis_x);
    read_field(j, "fat_axis_y", spec.fat_axis_y);
    read_field(j, "septum_half_width", spec.septum_half_width);
    read_field(j, "lobe_amplitude", spec.lobe_amplitude);
    read_field(j, "lobe_width", spec.lobe_width);
    read_field(j, "lobe_angle", spec.lobe_angle);
    validate_spec(spec);
    return spec;
}

void save_spec(const PhantomSpec& spec, const std::string& path) {
    json j;
    j["seed"] = spec.seed;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["muscles"] = spec.muscles;
    j["slices_per_volume"] = spec.slices_per_volume;
    j["bone_band"] = {spec.bone_band.lo, spec.bone_band.hi};
    j["muscle_band"] = {spec.muscle_band.lo, spec.muscle_band.hi};
    j["fat_band"] = {spec.fat_band.lo, spec.fat_band.hi};
    j["septa_level"] = spec.septa_level;
    j["air_level"] = spec.air_level;
    j["noise_variance"] = spec.noise_variance;
    j["striation_frequency"] = spec.striation_frequency;
    j["striation_amplitude"] = spec.striation_amplitude;
    j["jitter"] = spec.jitter;
    j["subject_shift"] = spec.subject_shift;
    j["bone_center_x"] = spec.bone_center().x;
    j["bone_center_y"] = spec.bone_center().y;
    j["bone_radius"] = spec.bone_radius;
    j["marrow_radius"] = spec.marrow_radius;
    j["muscle_center_x"] = spec.muscle_center().x;
    j["muscle_center_y"] = spec.muscle_center().y;
    j["muscle_axis_x"] = spec.muscle_axis_x;
    j["muscle_axis_y"] = spec.muscle_axis_y;
    j["fat_axis_x"] = spec.fat_axis_x;
    j["fat_axis_y"] = spec.fat_axis_y;
    j["septum_half_width"] = spec.septum_half_width;
    j["lobe_amplitude"] = spec.lobe_amplitude;
    j["lobe_width"] = spec.lobe_width;
    j["lobe_angle"] = spec.lobe_angle;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write phantom spec '" + path + "'");
    out << j.dump(2) << "\n";
}

} // namespace museg::phantom
