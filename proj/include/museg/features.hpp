#pragma once

#include <array>
#include <vector>

#include "museg/image.hpp"
#include "museg/preproc.hpp"

namespace museg::features {

inline constexpr int kHogBins = 9;
inline constexpr int kHogPerCell = 36; // 4 neighborhood normalizations x 9 bins
inline constexpr int kWaveletLevels = 3;
inline constexpr int kWaveletFeatures = 10; // LL3 + {H,V,D} x 3 levels
inline constexpr int kDescriptorLength = 54;

/// 54-component per-block texture descriptor.
/// Layout: [0,36) HOG, [36,40) raw moments, [40,44) LoG moments, [44,54) wavelet.
using BlockDescriptor = std::array<double, kDescriptorLength>;

struct DescriptorGrid {
    int rows = 0;
    int cols = 0;
    std::vector<BlockDescriptor> blocks; // row-major

    BlockDescriptor& at(int r, int c) { return blocks[static_cast<size_t>(r) * cols + c]; }
    const BlockDescriptor& at(int r, int c) const {
        return blocks[static_cast<size_t>(r) * cols + c];
    }
};

// ---------------------------------------------------------------------------
// HOG (Dalal-Triggs variant)
// ---------------------------------------------------------------------------
// Cell = 16x16 pixels, 9 unsigned orientation bins over [0,pi), bin centers at
// k*pi/9, votes split bilinearly between the two nearest centers (wrapping).
// Each cell histogram is normalized once per 2x2-cell neighborhood containing
// it (divisor = neighborhood L2 norm + eps, entries clipped at 0.2), stacking
// to 36 values per cell. Boundary cells clamp neighbor indices into range.

inline constexpr double kHogClip = 0.2;
/// 1e-4 per cell pixel; a 16x16 cell gives eps = 0.0256.
inline constexpr double kHogEpsilonPerPixel = 1e-4;

struct HogField {
    int rows = 0;
    int cols = 0;
    std::vector<std::array<double, kHogPerCell>> cells; // row-major

    const std::array<double, kHogPerCell>& at(int r, int c) const {
        return cells[static_cast<size_t>(r) * cols + c];
    }
};

HogField hog_grid(const GrayImage& image);

/// Population moments of a tile: mean, variance, skewness, kurtosis (non-excess).
/// Degenerate variance (<= 1e-12) pins skewness and kurtosis to 0.
std::array<double, 4> block_moments(const std::vector<double>& tile);

// ---------------------------------------------------------------------------
// Orthonormal Haar DWT (3 levels)
// ---------------------------------------------------------------------------

struct Subband {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
};

struct WaveletPyramid {
    int levels = kWaveletLevels;
    Subband ll;                              // approximation after the last level
    std::array<Subband, kWaveletLevels> h;   // horizontal details, level 1..3
    std::array<Subband, kWaveletLevels> v;   // vertical details
    std::array<Subband, kWaveletLevels> d;   // diagonal details
};

/// Separable analysis with taps (1,1)/sqrt(2) and (1,-1)/sqrt(2); requires
/// dimensions divisible by 2^levels.
WaveletPyramid haar_dwt(const GrayImage& image);

/// Exact inverse of haar_dwt.
GrayImage haar_idwt(const WaveletPyramid& pyr);

/// 10-vector [LL3, H1,V1,D1, H2,V2,D2, H3,V3,D3]; each entry is the mean
/// absolute coefficient over the block's footprint in that subband
/// (8x8 at level 1, 4x4 at level 2, 2x2 at level 3).
std::array<double, kWaveletFeatures> wavelet_block_features(const WaveletPyramid& pyr, int r,
                                                            int c);

/// Full 54-feature descriptor for every block of the image.
/// The image is truncated to whole 16x16 blocks; the LoG response is computed
/// on the full image before tiling. log_sigma/log_size parameterize the filter.
DescriptorGrid assemble_descriptor(const GrayImage& image, double log_sigma = 1.5,
                                   int log_size = 5);

} // namespace museg::features
