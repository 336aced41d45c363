#include "museg/preproc.hpp"

#include <cmath>

namespace museg::preproc {

double log_tap(int x, int y, double sigma) {
    const double s2 = sigma * sigma;
    const double r2 = static_cast<double>(x) * x + static_cast<double>(y) * y;
    return -1.0 / (M_PI * s2 * s2) * (1.0 - r2 / (2.0 * s2)) * std::exp(-r2 / (2.0 * s2));
}

LogKernel log_kernel(int size, double sigma) {
    if (size < 3 || size % 2 == 0) throw DataError("LoG kernel size must be odd and >= 3");
    if (sigma <= 0.0) throw DataError("LoG sigma must be positive");

    LogKernel k;
    k.size = size;
    k.sigma = sigma;
    k.taps.resize(static_cast<size_t>(size) * size);
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double t = log_tap(j - half, i - half, sigma);
            k.taps[static_cast<size_t>(i) * size + j] = t;
            sum += t;
        }
    const double mean = sum / static_cast<double>(size * size);
    for (double& t : k.taps) t -= mean; // zero response to constants, exactly
    return k;
}

GrayImage log_filter(const GrayImage& image, const LogKernel& kernel) {
    if (image.width < kernel.size || image.height < kernel.size)
        throw DataError("image smaller than LoG kernel");

    GrayImage out(image.width, image.height);
    const int half = kernel.size / 2;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kernel.size; ++i) {
                const int sy = std::clamp(y + i - half, 0, image.height - 1);
                for (int j = 0; j < kernel.size; ++j) {
                    const int sx = std::clamp(x + j - half, 0, image.width - 1);
                    acc += kernel.at(i, j) * image.at(sx, sy);
                }
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

BlockGrid grid_of(const GrayImage& image, int block_size) {
    if (image.width < block_size || image.height < block_size)
        throw DataError("image smaller than one block");
    BlockGrid g;
    g.block_size = block_size;
    g.cols = image.width / block_size;
    g.rows = image.height / block_size;
    return g;
}

std::vector<double> block_view(const GrayImage& image, const BlockGrid& grid, int r, int c) {
    if (r < 0 || r >= grid.rows || c < 0 || c >= grid.cols)
        throw DataError("block (" + std::to_string(r) + "," + std::to_string(c) +
                        ") outside grid");
    const int b = grid.block_size;
    std::vector<double> tile(static_cast<size_t>(b) * b);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j)
            tile[static_cast<size_t>(i) * b + j] = image.at(c * b + j, r * b + i);
    return tile;
}

} // namespace museg::preproc
