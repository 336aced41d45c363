#include "museg/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "museg/imgio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace museg::atlas {

// ---------------------------------------------------------------------------
// Bone detection: Otsu -> dark class -> 8-connected components -> most
// circular component with plausible area.
// ---------------------------------------------------------------------------

namespace {

constexpr int kHistBins = 256;

using Histogram = std::array<std::int64_t, kHistBins>;

Histogram intensity_histogram(const GrayImage& image) {
    Histogram hist{};
    for (double v : image.data) {
        int bin = static_cast<int>(v * kHistBins);
        bin = std::clamp(bin, 0, kHistBins - 1);
        ++hist[static_cast<size_t>(bin)];
    }
    return hist;
}

// Otsu over bins [0, upper]; returns the last bin of the lower class.
int otsu_bin(const Histogram& hist, int upper) {
    double total = 0.0, sum_all = 0.0;
    for (int i = 0; i <= upper; ++i) {
        total += static_cast<double>(hist[static_cast<size_t>(i)]);
        sum_all += i * static_cast<double>(hist[static_cast<size_t>(i)]);
    }
    double best_var = -1.0;
    int best_t = 0;
    double w0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < upper; ++t) {
        w0 += static_cast<double>(hist[static_cast<size_t>(t)]);
        sum0 += t * static_cast<double>(hist[static_cast<size_t>(t)]);
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best_var) {
            best_var = between;
            best_t = t;
        }
    }
    return best_t;
}

struct Component {
    std::int64_t area = 0;
    double cx = 0.0, cy = 0.0;
    double sum_xx = 0.0, sum_yy = 0.0; // raw second moments

    // 4*pi*A/P^2 with the moment-equivalent perimeter P = 2*pi*sqrt(2*mu/A),
    // where mu is the central second moment. Exact 1.0 for an ideal disk and
    // immune to the staircase artifact that makes crack-edge perimeters rank
    // squares above circles.
    double circularity() const {
        const double a = static_cast<double>(area);
        const double mu = (sum_xx - a * cx * cx) + (sum_yy - a * cy * cy);
        if (mu <= 1e-9) return 0.0;
        return a * a / (2.0 * M_PI * mu);
    }
};

std::vector<Component> dark_components(const GrayImage& image, int threshold_bin) {
    const int w = image.width, h = image.height;
    std::vector<std::uint8_t> dark(image.size());
    for (size_t i = 0; i < image.size(); ++i) {
        int bin = static_cast<int>(image.data[i] * kHistBins);
        bin = std::clamp(bin, 0, kHistBins - 1);
        dark[i] = bin <= threshold_bin ? 1 : 0;
    }

    std::vector<std::int32_t> comp(image.size(), -1);
    std::vector<Component> out;
    std::vector<std::int32_t> stack;
    for (int y0 = 0; y0 < h; ++y0)
        for (int x0 = 0; x0 < w; ++x0) {
            const size_t i0 = static_cast<size_t>(y0) * w + x0;
            if (!dark[i0] || comp[i0] >= 0) continue;
            const auto id = static_cast<std::int32_t>(out.size());
            out.emplace_back();
            Component& c = out.back();
            comp[i0] = id;
            stack.assign(1, static_cast<std::int32_t>(i0));
            while (!stack.empty()) {
                const std::int32_t i = stack.back();
                stack.pop_back();
                const int x = i % w, y = i / w;
                c.area += 1;
                c.cx += x;
                c.cy += y;
                c.sum_xx += static_cast<double>(x) * x;
                c.sum_yy += static_cast<double>(y) * y;
                static constexpr int d8[8][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1},
                                                 {1, 1},  {1, -1}, {-1, 1}, {-1, -1}};
                for (const auto& d : d8) {
                    const int nx = x + d[0], ny = y + d[1];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    const size_t ni = static_cast<size_t>(ny) * w + nx;
                    if (dark[ni] && comp[ni] < 0) {
                        comp[ni] = id;
                        stack.push_back(static_cast<std::int32_t>(ni));
                    }
                }
            }
            c.cx /= static_cast<double>(c.area);
            c.cy /= static_cast<double>(c.area);
        }
    return out;
}

} // namespace

Point2 bone_centroid(const GrayImage& image, const BoneParams& params) {
    if (image.width <= 0 || image.height <= 0) throw DataError("empty image");
    const Histogram hist = intensity_histogram(image);

    // The slice histogram has up to four modes (air, bone, muscle, fat); when
    // the dominant Otsu split lands above the muscle mode the dark class is
    // one giant blob and no candidate survives, so refine by re-running Otsu
    // within the lower class.
    int upper = kHistBins - 1;
    for (int attempt = 0; attempt < 3; ++attempt) {
        const int t = otsu_bin(hist, upper);
        const std::vector<Component> comps = dark_components(image, t);
        const Component* best = nullptr;
        double best_circ = -1.0;
        for (const auto& c : comps) {
            if (c.area < params.min_area || c.area > params.max_area) continue;
            const double circ = c.circularity();
            if (circ > best_circ) {
                best_circ = circ;
                best = &c;
            }
        }
        if (best) return {best->cx, best->cy};
        if (t <= 0 || t >= upper) break;
        upper = t;
    }
    throw PipelineError("bone not found (no dark component with area in [" +
                        std::to_string(params.min_area) + "," +
                        std::to_string(params.max_area) + "])");
}

// ---------------------------------------------------------------------------
// Keypoints
// ---------------------------------------------------------------------------

namespace {

double cross3(Point2 o, Point2 a, Point2 b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain; returns hull CCW in (x,y) math orientation.
std::vector<Point2> convex_hull(std::vector<Point2> pts) {
    std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](Point2 a, Point2 b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const size_t n = pts.size();
    if (n < 3) return {};
    std::vector<Point2> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) { // lower
        while (k >= 2 && cross3(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = n - 1; i-- > 0;) { // upper
        while (k >= lower && cross3(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

} // namespace

Keypoints keypoints_from_mask(const LabelMask& mask, Point2 centroid) {
    std::vector<Point2> pts;
    pts.reserve(1024);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y) > 0) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
    if (pts.empty()) throw PipelineError("keypoints: empty foreground");

    std::vector<Point2> hull = convex_hull(std::move(pts));
    if (hull.size() < 3) throw PipelineError("keypoints: degenerate (collinear) foreground");

    Keypoints kp;
    kp.bone_centroid = centroid;
    kp.hull = std::move(hull);

    double best_d2 = -1.0;
    double best_angle = 0.0;
    for (const Point2& v : kp.hull) {
        const Point2 d = v - centroid;
        const double d2 = dot(d, d);
        const double angle = std::atan2(d.y, d.x);
        if (d2 > best_d2 || (d2 == best_d2 && angle < best_angle)) {
            best_d2 = d2;
            best_angle = angle;
            kp.distal_point = v;
        }
    }
    return kp;
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

Point2 Alignment::apply(Point2 p) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double x = p.x + translation.x - pivot.x;
    const double y = p.y + translation.y - pivot.y;
    return {pivot.x + scale * (c * x - s * y), pivot.y + scale * (s * x + c * y)};
}

Point2 Alignment::apply_inverse(Point2 p) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double x = (p.x - pivot.x) / scale;
    const double y = (p.y - pivot.y) / scale;
    return {c * x + s * y + pivot.x - translation.x, -s * x + c * y + pivot.y - translation.y};
}

Alignment Alignment::inverted() const {
    Alignment inv;
    inv.scale = 1.0 / scale;
    inv.rotation = rotation == 0.0 ? 0.0 : -rotation;
    inv.pivot = pivot;
    // forward maps t by +translation about pivot; solve for the reverse shift
    const double c = std::cos(rotation), s = std::sin(rotation);
    inv.translation = {-scale * (c * translation.x - s * translation.y),
                       -scale * (s * translation.x + c * translation.y)};
    if (inv.rotation <= -M_PI) inv.rotation += 2.0 * M_PI;
    return inv;
}

Alignment compute_alignment(const Keypoints& ref, const Keypoints& tgt) {
    const Point2 d1 = ref.distal_point - ref.bone_centroid;
    const Point2 d2 = tgt.distal_point - tgt.bone_centroid;
    const double len1 = norm(d1), len2 = norm(d2);
    if (len2 <= 0.0) throw PipelineError("alignment: zero-length target keypoint vector");
    if (len1 <= 0.0) throw PipelineError("alignment: zero-length reference keypoint vector");

    Alignment a;
    a.translation = ref.bone_centroid - tgt.bone_centroid;
    a.pivot = ref.bone_centroid;
    a.rotation = std::atan2(cross(d2, d1), dot(d2, d1)); // signed angle d2 -> d1
    if (a.rotation <= -M_PI) a.rotation += 2.0 * M_PI;
    a.scale = len1 / len2;
    return a;
}

namespace {

LabelMask warp_with(const LabelMask& mask, int out_w, int out_h,
                    const std::function<Point2(Point2)>& map_out_to_src) {
    LabelMask out(out_w, out_h);
    out.palette = mask.palette;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const Point2 src = map_out_to_src({static_cast<double>(x), static_cast<double>(y)});
            const int sx = static_cast<int>(std::llround(src.x));
            const int sy = static_cast<int>(std::llround(src.y));
            if (mask.in_bounds(sx, sy)) out.at(x, y) = mask.at(sx, sy);
        }
    return out;
}

} // namespace

LabelMask warp_mask(const LabelMask& mask, const Alignment& a, int out_w, int out_h) {
    return warp_with(mask, out_w, out_h, [&](Point2 p) { return a.apply_inverse(p); });
}

LabelMask warp_back(const LabelMask& mask, const Alignment& a, int out_w, int out_h) {
    return warp_with(mask, out_w, out_h, [&](Point2 p) { return a.apply(p); });
}

// ---------------------------------------------------------------------------
// Atlas accumulation and truncation
// ---------------------------------------------------------------------------

int truncation_threshold(int peak) { return (peak + 1) / 2; }

void accumulate_mask(MuscleAtlas& atlas, const LabelMask& aligned) {
    if (aligned.width != atlas.width || aligned.height != atlas.height)
        throw DataError("atlas accumulation: dimension mismatch");
    const size_t n = aligned.labels.size();
    for (size_t i = 0; i < n; ++i) {
        const int id = aligned.labels[i];
        if (id == 0) continue;
        auto [it, inserted] = atlas.muscles.try_emplace(id);
        if (inserted) it->second.counts.assign(n, 0);
        ++it->second.counts[i];
    }
    for (const auto& [id, name] : aligned.palette)
        if (id > 0) atlas.palette.emplace(id, name);
    ++atlas.contributors;
}

void truncate_regions(MuscleAtlas& atlas) {
    for (auto& [id, m] : atlas.muscles) {
        m.peak = 0;
        for (std::uint16_t c : m.counts) m.peak = std::max<int>(m.peak, c);
        m.region.assign(m.counts.size(), 0);
        if (m.peak == 0) continue;
        const int thr = truncation_threshold(m.peak);
        for (size_t i = 0; i < m.counts.size(); ++i)
            if (m.counts[i] >= thr) m.region[i] = 1;
    }
}

MuscleAtlas atlas_from_aligned(std::span<const LabelMask> masks, int width, int height) {
    MuscleAtlas atlas;
    atlas.width = width;
    atlas.height = height;
    for (const LabelMask& m : masks) accumulate_mask(atlas, m);
    truncate_regions(atlas);
    return atlas;
}

MuscleAtlas build_atlas(std::span<const LabelMask> masks, std::span<const GrayImage> images,
                        int reference_index, const BoneParams& params,
                        std::span<const std::string> names) {
    if (masks.size() != images.size()) throw DataError("build_atlas: mask/image count mismatch");
    if (masks.size() < 2) throw DataError("build_atlas: need at least 2 contributors");
    if (reference_index < 0 || static_cast<size_t>(reference_index) >= masks.size())
        throw DataError("build_atlas: reference index out of range");

    auto name_of = [&](size_t i) {
        return i < names.size() ? names[i] : "contributor " + std::to_string(i);
    };

    const GrayImage& ref_img = images[static_cast<size_t>(reference_index)];
    const LabelMask& ref_mask = masks[static_cast<size_t>(reference_index)];
    const Keypoints ref_kp =
        keypoints_from_mask(ref_mask, bone_centroid(ref_img, params)); // throws on failure

    MuscleAtlas atlas;
    atlas.width = ref_mask.width;
    atlas.height = ref_mask.height;
    atlas.reference = ref_kp;

    for (size_t i = 0; i < masks.size(); ++i) {
        if (static_cast<int>(i) == reference_index) {
            accumulate_mask(atlas, ref_mask);
            continue;
        }
        try {
            const Keypoints kp = keypoints_from_mask(masks[i], bone_centroid(images[i], params));
            const Alignment a = compute_alignment(ref_kp, kp);
            accumulate_mask(atlas, warp_mask(masks[i], a, atlas.width, atlas.height));
        } catch (const PipelineError& e) {
            std::fprintf(stderr, "warning: atlas skipped %s: %s\n", name_of(i).c_str(), e.what());
        }
    }
    truncate_regions(atlas);
    return atlas;
}

// ---------------------------------------------------------------------------
// Label transfer
// ---------------------------------------------------------------------------

namespace {

// Exact squared Euclidean distance transform (Felzenszwalb-Huttenlocher) that
// also propagates the index of the nearest seed pixel.
void edt_with_argmin(int w, int h, const std::vector<std::uint8_t>& seed,
                     std::vector<std::int32_t>& nearest) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(static_cast<size_t>(w) * h, kInf);
    nearest.assign(static_cast<size_t>(w) * h, -1);

    // Pass 1: per column, nearest seed along y.
    for (int x = 0; x < w; ++x) {
        int last = -1;
        for (int y = 0; y < h; ++y) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (seed[i]) last = y;
            if (last >= 0) {
                const double dy = y - last;
                dist[i] = dy * dy;
                nearest[i] = last * w + x;
            }
        }
        last = -1;
        for (int y = h - 1; y >= 0; --y) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (seed[i]) last = y;
            if (last >= 0) {
                const double dy = last - y;
                if (dy * dy < dist[i]) {
                    dist[i] = dy * dy;
                    nearest[i] = last * w + x;
                }
            }
        }
    }

    // Pass 2: per row, lower envelope of parabolas dist1[q] + (x-q)^2.
    std::vector<int> v(static_cast<size_t>(w));
    std::vector<double> z(static_cast<size_t>(w) + 1);
    std::vector<double> frow(static_cast<size_t>(w));
    std::vector<std::int32_t> nrow(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
        const size_t row = static_cast<size_t>(y) * w;
        int kk = -1;
        for (int q = 0; q < w; ++q) {
            const double fq = dist[row + q];
            if (fq == kInf) continue;
            double s = 0.0;
            while (kk >= 0) {
                const int p = v[static_cast<size_t>(kk)];
                s = (fq + q * q - (dist[row + p] + p * p)) / (2.0 * (q - p));
                if (s > z[static_cast<size_t>(kk)]) break;
                --kk;
            }
            ++kk;
            v[static_cast<size_t>(kk)] = q;
            z[static_cast<size_t>(kk)] = kk == 0 ? -kInf : s;
            z[static_cast<size_t>(kk) + 1] = kInf;
        }
        if (kk < 0) continue; // row has no reachable seeds (empty column pass)
        int j = 0;
        for (int x = 0; x < w; ++x) {
            while (z[static_cast<size_t>(j) + 1] < x) ++j;
            const int q = v[static_cast<size_t>(j)];
            frow[static_cast<size_t>(x)] = dist[row + q] + static_cast<double>(x - q) * (x - q);
            nrow[static_cast<size_t>(x)] = nearest[row + q];
        }
        for (int x = 0; x < w; ++x) {
            dist[row + x] = frow[static_cast<size_t>(x)];
            nearest[row + x] = nrow[static_cast<size_t>(x)];
        }
    }
}

// Resolve the label at every atlas pixel: inside one or more truncated regions
// the highest count wins (then the smaller id); elsewhere the label of the
// nearest region pixel.
std::vector<std::uint8_t> full_label_map(const MuscleAtlas& atlas) {
    const size_t n = static_cast<size_t>(atlas.width) * atlas.height;
    std::vector<std::uint8_t> direct(n, 0);
    std::vector<std::uint16_t> best_count(n, 0);
    std::vector<std::uint8_t> seed(n, 0);
    for (const auto& [id, m] : atlas.muscles) { // map order: ascending id
        if (m.peak == 0) continue;
        for (size_t i = 0; i < n; ++i) {
            if (!m.region[i]) continue;
            seed[i] = 1;
            if (m.counts[i] > best_count[i]) { // ties keep the smaller id
                best_count[i] = m.counts[i];
                direct[i] = static_cast<std::uint8_t>(id);
            }
        }
    }
    bool any = false;
    for (size_t i = 0; i < n && !any; ++i) any = seed[i] != 0;
    if (!any) throw PipelineError("atlas has no truncated regions");

    std::vector<std::int32_t> nearest;
    edt_with_argmin(atlas.width, atlas.height, seed, nearest);
    std::vector<std::uint8_t> full(n, 0);
    for (size_t i = 0; i < n; ++i)
        full[i] = seed[i] ? direct[i] : direct[static_cast<size_t>(nearest[i])];
    return full;
}

} // namespace

LabelMask label_segmentation(const LabelMask& binary, const GrayImage& image,
                             const MuscleAtlas& atlas, const BoneParams& params) {
    const Keypoints kp = keypoints_from_mask(binary, bone_centroid(image, params));
    const Alignment a = compute_alignment(atlas.reference, kp);
    const std::vector<std::uint8_t> labels = full_label_map(atlas);

    LabelMask out(binary.width, binary.height);
    out.palette = atlas.palette;
    for (int y = 0; y < binary.height; ++y)
        for (int x = 0; x < binary.width; ++x) {
            if (binary.at(x, y) == 0) continue;
            // label in the atlas frame; geometry stays in the native frame
            const Point2 q = a.apply({static_cast<double>(x), static_cast<double>(y)});
            const int qx = std::clamp(static_cast<int>(std::llround(q.x)), 0, atlas.width - 1);
            const int qy = std::clamp(static_cast<int>(std::llround(q.y)), 0, atlas.height - 1);
            out.at(x, y) = labels[static_cast<size_t>(qy) * atlas.width + qx];
        }
    return out;
}

// ---------------------------------------------------------------------------
// Atlas files: atlas.json + one 16-bit count PNG per muscle.
// ---------------------------------------------------------------------------

void save_atlas(const MuscleAtlas& atlas, const std::string& dir) {
    fs::create_directories(dir);
    json j;
    j["reference_dims"] = {atlas.width, atlas.height};
    j["contributors"] = atlas.contributors;
    j["reference_keypoints"] = {
        {"centroid", {atlas.reference.bone_centroid.x, atlas.reference.bone_centroid.y}},
        {"distal", {atlas.reference.distal_point.x, atlas.reference.distal_point.y}}};
    j["muscles"] = json::object();
    for (const auto& [id, m] : atlas.muscles) {
        const std::string file = "muscle_" + std::to_string(id) + ".png";
        GrayImage counts(atlas.width, atlas.height);
        for (size_t i = 0; i < m.counts.size(); ++i)
            counts.data[i] = static_cast<double>(m.counts[i]) / 65535.0;
        imgio::save_image(counts, (fs::path(dir) / file).string(), 16);
        json jm;
        jm["peak"] = m.peak;
        jm["file"] = file;
        if (auto it = atlas.palette.find(id); it != atlas.palette.end()) jm["name"] = it->second;
        j["muscles"][std::to_string(id)] = std::move(jm);
    }
    std::ofstream out(fs::path(dir) / "atlas.json", std::ios::binary);
    if (!out) throw DataError("cannot write atlas metadata in '" + dir + "'");
    out << j.dump(2) << "\n";
}

MuscleAtlas load_atlas(const std::string& dir) {
    const fs::path meta = fs::path(dir) / "atlas.json";
    std::ifstream in(meta);
    if (!in) throw DataError("missing atlas metadata '" + meta.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("atlas metadata: " + std::string(e.what()));
    }

    MuscleAtlas atlas;
    atlas.width = j.at("reference_dims").at(0).get<int>();
    atlas.height = j.at("reference_dims").at(1).get<int>();
    atlas.contributors = j.at("contributors").get<int>();
    const auto& kp = j.at("reference_keypoints");
    atlas.reference.bone_centroid = {kp.at("centroid").at(0).get<double>(),
                                     kp.at("centroid").at(1).get<double>()};
    atlas.reference.distal_point = {kp.at("distal").at(0).get<double>(),
                                    kp.at("distal").at(1).get<double>()};

    for (auto it = j.at("muscles").begin(); it != j.at("muscles").end(); ++it) {
        const int id = std::stoi(it.key());
        const GrayImage counts =
            imgio::load_image((fs::path(dir) / it.value().at("file").get<std::string>()).string());
        if (counts.width != atlas.width || counts.height != atlas.height)
            throw DataError("atlas count map dimension mismatch for muscle " + it.key());
        MuscleMap m;
        m.counts.resize(counts.size());
        for (size_t i = 0; i < counts.size(); ++i)
            m.counts[i] = static_cast<std::uint16_t>(std::llround(counts.data[i] * 65535.0));
        if (it.value().contains("name"))
            atlas.palette[id] = it.value()["name"].get<std::string>();
        atlas.muscles.emplace(id, std::move(m));
    }
    truncate_regions(atlas);
    for (auto& [id, m] : atlas.muscles) {
        const int stored_peak = j.at("muscles").at(std::to_string(id)).at("peak").get<int>();
        if (stored_peak != m.peak)
            throw DataError("atlas count map for muscle " + std::to_string(id) +
                            " does not match its stored peak");
    }
    return atlas;
}

} // namespace museg::atlas
