#include "museg/features.hpp"

#include <algorithm>
#include <cmath>

namespace museg::features {

namespace {

// Central-difference gradients with replicate borders.
void gradients(const GrayImage& img, std::vector<double>& gx, std::vector<double>& gy) {
    const int w = img.width, h = img.height;
    gx.resize(img.size());
    gy.resize(img.size());
    for (int y = 0; y < h; ++y) {
        const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
        for (int x = 0; x < w; ++x) {
            const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
            const size_t i = static_cast<size_t>(y) * w + x;
            gx[i] = 0.5 * (img.at(xp, y) - img.at(xm, y));
            gy[i] = 0.5 * (img.at(x, yp) - img.at(x, ym));
        }
    }
}

} // namespace

HogField hog_grid(const GrayImage& image) {
    const preproc::BlockGrid grid = preproc::grid_of(image);
    const int cell = grid.block_size;

    std::vector<double> gx, gy;
    gradients(image, gx, gy);

    // Raw 9-bin magnitude histograms per cell, orientation folded into [0,pi).
    const double bin_width = M_PI / kHogBins;
    std::vector<std::array<double, kHogBins>> hist(
        static_cast<size_t>(grid.rows) * grid.cols, std::array<double, kHogBins>{});
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            auto& hcell = hist[static_cast<size_t>(r) * grid.cols + c];
            for (int y = r * cell; y < (r + 1) * cell; ++y)
                for (int x = c * cell; x < (c + 1) * cell; ++x) {
                    const size_t i = static_cast<size_t>(y) * image.width + x;
                    const double mag = std::hypot(gx[i], gy[i]);
                    if (mag == 0.0) continue;
                    double theta = std::atan2(gy[i], gx[i]);
                    if (theta < 0.0) theta += M_PI;      // unsigned orientation
                    if (theta >= M_PI) theta -= M_PI;
                    // Bin centers sit at k*bin_width; split the vote between
                    // the two nearest centers, wrapping pi onto 0.
                    const double pos = theta / bin_width;
                    const int k0 = static_cast<int>(pos);
                    const double frac = pos - k0;
                    hcell[static_cast<size_t>(k0 % kHogBins)] += mag * (1.0 - frac);
                    hcell[static_cast<size_t>((k0 + 1) % kHogBins)] += mag * frac;
                }
        }

    std::vector<double> cell_sq(hist.size());
    for (size_t i = 0; i < hist.size(); ++i) {
        double s = 0.0;
        for (double v : hist[i]) s += v * v;
        cell_sq[i] = s;
    }

    // One normalization per 2x2-cell neighborhood containing the cell, keyed by
    // the diagonal partner; out-of-range indices clamp (duplicates included).
    const double eps = kHogEpsilonPerPixel * cell * cell;
    static constexpr int kDiag[4][2] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};

    HogField out;
    out.rows = grid.rows;
    out.cols = grid.cols;
    out.cells.resize(hist.size());
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            const auto& hcell = hist[static_cast<size_t>(r) * grid.cols + c];
            auto& dst = out.cells[static_cast<size_t>(r) * grid.cols + c];
            for (int nb = 0; nb < 4; ++nb) {
                const int r2 = std::clamp(r + kDiag[nb][0], 0, grid.rows - 1);
                const int c2 = std::clamp(c + kDiag[nb][1], 0, grid.cols - 1);
                const double sq = cell_sq[static_cast<size_t>(r) * grid.cols + c] +
                                  cell_sq[static_cast<size_t>(r) * grid.cols + c2] +
                                  cell_sq[static_cast<size_t>(r2) * grid.cols + c] +
                                  cell_sq[static_cast<size_t>(r2) * grid.cols + c2];
                const double factor = 1.0 / (std::sqrt(sq) + eps);
                for (int k = 0; k < kHogBins; ++k)
                    dst[static_cast<size_t>(nb * kHogBins + k)] =
                        std::min(kHogClip, hcell[static_cast<size_t>(k)] * factor);
            }
        }
    return out;
}

std::array<double, 4> block_moments(const std::vector<double>& tile) {
    const double n = static_cast<double>(tile.size());
    double mean = 0.0;
    for (double v : tile) {
        if (!std::isfinite(v)) throw DataError("non-finite value in block");
        mean += v;
    }
    mean /= n;

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : tile) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    if (m2 <= 1e-12) return {mean, m2, 0.0, 0.0};
    const double s = std::sqrt(m2);
    return {mean, m2, m3 / (s * s * s), m4 / (m2 * m2)};
}

// ---------------------------------------------------------------------------
// Haar DWT
// ---------------------------------------------------------------------------

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

// One separable analysis level: in (w x h) -> ll, lh, hl, hh (w/2 x h/2).
// lh = low along x / high along y (horizontal detail), hl the transpose.
void haar_level(const std::vector<double>& in, int w, int h, std::vector<double>& ll,
                std::vector<double>& lh, std::vector<double>& hl, std::vector<double>& hh) {
    const int hw = w / 2, hh2 = h / 2;
    std::vector<double> lo(static_cast<size_t>(hw) * h), hi(static_cast<size_t>(hw) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < hw; ++x) {
            const double a = in[static_cast<size_t>(y) * w + 2 * x];
            const double b = in[static_cast<size_t>(y) * w + 2 * x + 1];
            lo[static_cast<size_t>(y) * hw + x] = (a + b) * kInvSqrt2;
            hi[static_cast<size_t>(y) * hw + x] = (a - b) * kInvSqrt2;
        }
    ll.assign(static_cast<size_t>(hw) * hh2, 0.0);
    lh.assign(static_cast<size_t>(hw) * hh2, 0.0);
    hl.assign(static_cast<size_t>(hw) * hh2, 0.0);
    hh.assign(static_cast<size_t>(hw) * hh2, 0.0);
    for (int y = 0; y < hh2; ++y)
        for (int x = 0; x < hw; ++x) {
            const size_t top = static_cast<size_t>(2 * y) * hw + x;
            const size_t bot = static_cast<size_t>(2 * y + 1) * hw + x;
            const size_t o = static_cast<size_t>(y) * hw + x;
            ll[o] = (lo[top] + lo[bot]) * kInvSqrt2;
            lh[o] = (lo[top] - lo[bot]) * kInvSqrt2;
            hl[o] = (hi[top] + hi[bot]) * kInvSqrt2;
            hh[o] = (hi[top] - hi[bot]) * kInvSqrt2;
        }
}

void haar_level_inverse(const std::vector<double>& ll, const std::vector<double>& lh,
                        const std::vector<double>& hl, const std::vector<double>& hh, int w,
                        int h, std::vector<double>& out) {
    const int hw = w / 2, hh2 = h / 2;
    std::vector<double> lo(static_cast<size_t>(hw) * h), hi(static_cast<size_t>(hw) * h);
    for (int y = 0; y < hh2; ++y)
        for (int x = 0; x < hw; ++x) {
            const size_t o = static_cast<size_t>(y) * hw + x;
            const size_t top = static_cast<size_t>(2 * y) * hw + x;
            const size_t bot = static_cast<size_t>(2 * y + 1) * hw + x;
            lo[top] = (ll[o] + lh[o]) * kInvSqrt2;
            lo[bot] = (ll[o] - lh[o]) * kInvSqrt2;
            hi[top] = (hl[o] + hh[o]) * kInvSqrt2;
            hi[bot] = (hl[o] - hh[o]) * kInvSqrt2;
        }
    out.assign(static_cast<size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < hw; ++x) {
            const size_t i = static_cast<size_t>(y) * hw + x;
            out[static_cast<size_t>(y) * w + 2 * x] = (lo[i] + hi[i]) * kInvSqrt2;
            out[static_cast<size_t>(y) * w + 2 * x + 1] = (lo[i] - hi[i]) * kInvSqrt2;
        }
}

Subband make_band(std::vector<double>&& data, int w, int h) {
    Subband b;
    b.width = w;
    b.height = h;
    b.data = std::move(data);
    return b;
}

} // namespace

WaveletPyramid haar_dwt(const GrayImage& image) {
    const int div = 1 << kWaveletLevels;
    if (image.width % div != 0 || image.height % div != 0)
        throw DataError("haar_dwt: dimensions must be divisible by " + std::to_string(div));

    WaveletPyramid pyr;
    std::vector<double> cur = image.data;
    int w = image.width, h = image.height;
    for (int level = 0; level < kWaveletLevels; ++level) {
        std::vector<double> ll, lh, hl, hh;
        haar_level(cur, w, h, ll, lh, hl, hh);
        w /= 2;
        h /= 2;
        pyr.h[static_cast<size_t>(level)] = make_band(std::move(lh), w, h);
        pyr.v[static_cast<size_t>(level)] = make_band(std::move(hl), w, h);
        pyr.d[static_cast<size_t>(level)] = make_band(std::move(hh), w, h);
        cur = std::move(ll);
    }
    pyr.ll = make_band(std::move(cur), w, h);
    return pyr;
}

GrayImage haar_idwt(const WaveletPyramid& pyr) {
    std::vector<double> cur = pyr.ll.data;
    int w = pyr.ll.width, h = pyr.ll.height;
    for (int level = kWaveletLevels - 1; level >= 0; --level) {
        std::vector<double> out;
        haar_level_inverse(cur, pyr.h[static_cast<size_t>(level)].data,
                           pyr.v[static_cast<size_t>(level)].data,
                           pyr.d[static_cast<size_t>(level)].data, w * 2, h * 2, out);
        cur = std::move(out);
        w *= 2;
        h *= 2;
    }
    GrayImage img(w, h);
    img.data = std::move(cur);
    return img;
}

namespace {

double mean_abs_footprint(const Subband& band, int r, int c, int level) {
    const int side = preproc::kBlockSize >> level; // 8, 4, 2
    const int y0 = r * side, x0 = c * side;
    if (x0 + side > band.width || y0 + side > band.height)
        throw DataError("wavelet block footprint outside subband");
    double acc = 0.0;
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) acc += std::abs(band.at(x, y));
    return acc / static_cast<double>(side * side);
}

} // namespace

std::array<double, kWaveletFeatures> wavelet_block_features(const WaveletPyramid& pyr, int r,
                                                            int c) {
    std::array<double, kWaveletFeatures> f{};
    f[0] = mean_abs_footprint(pyr.ll, r, c, kWaveletLevels);
    int idx = 1;
    for (int level = 0; level < kWaveletLevels; ++level) {
        f[static_cast<size_t>(idx++)] = mean_abs_footprint(pyr.h[static_cast<size_t>(level)], r, c, level + 1);
        f[static_cast<size_t>(idx++)] = mean_abs_footprint(pyr.v[static_cast<size_t>(level)], r, c, level + 1);
        f[static_cast<size_t>(idx++)] = mean_abs_footprint(pyr.d[static_cast<size_t>(level)], r, c, level + 1);
    }
    return f;
}

DescriptorGrid assemble_descriptor(const GrayImage& image, double log_sigma, int log_size) {
    const preproc::BlockGrid grid = preproc::grid_of(image);

    // Crop to whole blocks for HOG/DWT; LoG runs on the full image so border
    // blocks see the true replicate-border response.
    GrayImage cropped = image;
    if (grid.covered_width() != image.width || grid.covered_height() != image.height) {
        cropped = GrayImage(grid.covered_width(), grid.covered_height());
        for (int y = 0; y < cropped.height; ++y)
            for (int x = 0; x < cropped.width; ++x) cropped.at(x, y) = image.at(x, y);
    }

    const HogField hog = hog_grid(cropped);
    const GrayImage log_resp = preproc::log_filter(image, preproc::log_kernel(log_size, log_sigma));
    const WaveletPyramid pyr = haar_dwt(cropped);

    DescriptorGrid out;
    out.rows = grid.rows;
    out.cols = grid.cols;
    out.blocks.resize(static_cast<size_t>(grid.rows) * grid.cols);
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            BlockDescriptor& d = out.at(r, c);
            const auto& hcell = hog.at(r, c);
            std::copy(hcell.begin(), hcell.end(), d.begin());
            const auto m_raw = block_moments(preproc::block_view(image, grid, r, c));
            const auto m_log = block_moments(preproc::block_view(log_resp, grid, r, c));
            std::copy(m_raw.begin(), m_raw.end(), d.begin() + kHogPerCell);
            std::copy(m_log.begin(), m_log.end(), d.begin() + kHogPerCell + 4);
            const auto wf = wavelet_block_features(pyr, r, c);
            std::copy(wf.begin(), wf.end(), d.begin() + kHogPerCell + 8);
        }
    return out;
}

} // namespace museg::features
