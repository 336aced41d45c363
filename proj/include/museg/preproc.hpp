#pragma once

#include <vector>

#include "museg/image.hpp"

namespace museg::preproc {

inline constexpr int kBlockSize = 16;

/// Non-overlapping axis-aligned block partition anchored at (0,0).
/// Trailing pixels beyond the last full block are ignored.
struct BlockGrid {
    int block_size = kBlockSize;
    int cols = 0;
    int rows = 0;

    int covered_width() const { return cols * block_size; }
    int covered_height() const { return rows * block_size; }
};

/// Laplacian-of-Gaussian kernel sampled on the integer lattice, mean-shifted
/// so the taps sum to exactly zero.
struct LogKernel {
    int size = 0;
    double sigma = 0.0;
    std::vector<double> taps; // size*size, row-major

    double at(int i, int j) const { return taps[static_cast<size_t>(i) * size + j]; }
};

/// Analytic LoG tap before mean shift: -1/(pi s^4) (1 - r^2/(2 s^2)) exp(-r^2/(2 s^2)).
double log_tap(int x, int y, double sigma);

LogKernel log_kernel(int size, double sigma);

/// 2-D correlation with replicate (edge-clamp) borders. Output is not re-normalized.
GrayImage log_filter(const GrayImage& image, const LogKernel& kernel);

BlockGrid grid_of(const GrayImage& image, int block_size = kBlockSize);

/// Copy out the 16x16 tile (r,c): pixels [16c,16c+16) x [16r,16r+16).
std::vector<double> block_view(const GrayImage& image, const BlockGrid& grid, int r, int c);

} // namespace museg::preproc
