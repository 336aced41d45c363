#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "museg/common.hpp"

namespace museg {

/// 2-D grayscale raster, row-major, intensities normalized to [0,1].
/// Pixel (x,y) sits at continuous coordinates (x,y); x runs along width.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    size_t size() const { return data.size(); }
};

/// Integer label raster paired with a GrayImage. 0 = background, k >= 1 = muscle id.
struct LabelMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;
    std::map<int, std::string> palette; // label id -> muscle name

    LabelMask() = default;
    LabelMask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), labels(static_cast<size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return labels[static_cast<size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    int max_label() const {
        int m = 0;
        for (auto v : labels) m = std::max<int>(m, v);
        return m;
    }
};

} // namespace museg
