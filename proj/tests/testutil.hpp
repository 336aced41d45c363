#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "museg/common.hpp"
#include "museg/image.hpp"

namespace testutil {

inline museg::GrayImage random_image(int w, int h, std::uint64_t seed) {
    museg::Rng rng(seed);
    museg::GrayImage img(w, h);
    for (double& v : img.data) v = rng.next_double();
    return img;
}

inline museg::LabelMask random_mask(int w, int h, int max_label, std::uint64_t seed) {
    museg::Rng rng(seed);
    museg::LabelMask mask(w, h);
    for (auto& v : mask.labels)
        v = static_cast<std::uint8_t>(rng.next_below(static_cast<std::uint64_t>(max_label) + 1));
    return mask;
}

// Temp directory scoped to one test.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        base_ = std::filesystem::temp_directory_path() /
                ("museg_test_" + tag + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(base_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(base_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string path(const std::string& name = {}) const {
        return name.empty() ? base_.string() : (base_ / name).string();
    }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path base_;
};

inline bool files_identical(const std::string& a, const std::string& b) {
    std::error_code ec;
    if (std::filesystem::file_size(a, ec) != std::filesystem::file_size(b, ec)) return false;
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return ca == cb;
}

} // namespace testutil
