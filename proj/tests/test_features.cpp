#include <doctest.h>

#include <cmath>

#include "museg/features.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace museg;
using namespace museg::features;

TEST_SUITE_BEGIN("features");

// ---------------------------------------------------------------------------
// HOG
// ---------------------------------------------------------------------------

TEST_CASE("HOG of a constant image is identically zero") {
    const HogField hog = hog_grid(GrayImage(64, 64, 0.42));
    for (const auto& cell : hog.cells)
        for (double v : cell) CHECK(v == 0.0);
}

TEST_CASE("vertical step edge concentrates mass in the orientation-0 bin") {
    // step through the middle of cell (1,1): gradient is horizontal -> theta 0
    GrayImage img(48, 48, 0.0);
    for (int y = 0; y < 48; ++y)
        for (int x = 24; x < 48; ++x) img.at(x, y) = 1.0;

    // oracle: central differences put all gradient energy at orientation 0
    const HogField hog = hog_grid(img);
    const auto& cell = hog.at(1, 1);
    double bin0 = 0.0, rest = 0.0;
    for (int nb = 0; nb < 4; ++nb)
        for (int k = 0; k < kHogBins; ++k) {
            if (k == 0)
                bin0 += cell[static_cast<size_t>(nb * kHogBins + k)];
            else
                rest += cell[static_cast<size_t>(nb * kHogBins + k)];
        }
    CHECK(bin0 > 0.0);
    CHECK(rest == 0.0);
}

TEST_CASE("normalized sub-histograms: L2 norm <= 1 and entries clipped at 0.2") {
    for (std::uint64_t seed : {21u, 22u, 23u, 24u}) {
        const GrayImage img = testutil::random_image(64, 64, seed);
        const HogField hog = hog_grid(img);
        for (const auto& cell : hog.cells)
            for (int nb = 0; nb < 4; ++nb) {
                double sq = 0.0;
                for (int k = 0; k < kHogBins; ++k) {
                    const double v = cell[static_cast<size_t>(nb * kHogBins + k)];
                    CHECK(v >= 0.0);
                    CHECK(v <= 0.2 + 1e-9);
                    sq += v * v;
                }
                CHECK(std::sqrt(sq) <= 1.0 + 1e-9);
            }
    }
}

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

TEST_CASE("constant tile has degenerate moments (5,0,0,0)") {
    const std::vector<double> tile(256, 5.0);
    const auto m = block_moments(tile);
    CHECK(m[0] == 5.0);
    CHECK(m[1] == 0.0);
    CHECK(m[2] == 0.0);
    CHECK(m[3] == 0.0);
}

TEST_CASE("half zeros / half ones tile: mean .5, var .25, skew 0, kurt 1") {
    std::vector<double> tile(256, 0.0);
    for (size_t i = 128; i < 256; ++i) tile[i] = 1.0;
    const auto m = block_moments(tile);
    CHECK(m[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(m[2] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(m[3] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("random tiles match the naive two-pass oracle") {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
        Rng rng(seed);
        std::vector<double> tile(256);
        for (double& v : tile) v = rng.next_double();
        const auto m = block_moments(tile);
        const auto ref = oracle::naive_moments(tile);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(m[static_cast<size_t>(i)] - ref[static_cast<size_t>(i)]) < 1e-12);
    }
}

TEST_CASE("non-finite tile values are rejected") {
    std::vector<double> tile(256, 1.0);
    tile[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)block_moments(tile), DataError);
}

// ---------------------------------------------------------------------------
// Haar DWT
// ---------------------------------------------------------------------------

TEST_CASE("constant image: all details zero, LL3 uniformly 8c") {
    const double c = 0.3;
    const WaveletPyramid pyr = haar_dwt(GrayImage(32, 32, c));
    for (int l = 0; l < kWaveletLevels; ++l) {
        for (double v : pyr.h[static_cast<size_t>(l)].data) CHECK(std::abs(v) < 1e-12);
        for (double v : pyr.v[static_cast<size_t>(l)].data) CHECK(std::abs(v) < 1e-12);
        for (double v : pyr.d[static_cast<size_t>(l)].data) CHECK(std::abs(v) < 1e-12);
    }
    for (double v : pyr.ll.data) CHECK(v == doctest::Approx(8.0 * c).epsilon(1e-12));
}

TEST_CASE("random 64x64 round-trip within 1e-9 and Parseval energy equality") {
    for (std::uint64_t seed : {31u, 32u, 33u}) {
        const GrayImage img = testutil::random_image(64, 64, seed);
        const WaveletPyramid pyr = haar_dwt(img);
        const GrayImage back = haar_idwt(pyr);
        REQUIRE(back.width == 64);
        double max_err = 0.0;
        for (size_t i = 0; i < img.size(); ++i)
            max_err = std::max(max_err, std::abs(img.data[i] - back.data[i]));
        CHECK(max_err < 1e-9);

        double pixel_energy = 0.0;
        for (double v : img.data) pixel_energy += v * v;
        double coeff_energy = 0.0;
        for (double v : pyr.ll.data) coeff_energy += v * v;
        for (int l = 0; l < kWaveletLevels; ++l) {
            for (double v : pyr.h[static_cast<size_t>(l)].data) coeff_energy += v * v;
            for (double v : pyr.v[static_cast<size_t>(l)].data) coeff_energy += v * v;
            for (double v : pyr.d[static_cast<size_t>(l)].data) coeff_energy += v * v;
        }
        CHECK(std::abs(coeff_energy - pixel_energy) / pixel_energy < 1e-9);
    }
}

TEST_CASE("subband dimensions halve per level; coefficient count is preserved") {
    const WaveletPyramid pyr = haar_dwt(GrayImage(64, 48));
    CHECK(pyr.h[0].width == 32);
    CHECK(pyr.h[0].height == 24);
    CHECK(pyr.h[2].width == 8);
    CHECK(pyr.ll.width == 8);
    CHECK(pyr.ll.height == 6);
    size_t total = pyr.ll.data.size();
    for (int l = 0; l < kWaveletLevels; ++l)
        total += pyr.h[static_cast<size_t>(l)].data.size() +
                 pyr.v[static_cast<size_t>(l)].data.size() +
                 pyr.d[static_cast<size_t>(l)].data.size();
    CHECK(total == static_cast<size_t>(64 * 48));
}

TEST_CASE("dimensions not divisible by 8 are rejected") {
    CHECK_THROWS_AS((void)haar_dwt(GrayImage(33, 64)), DataError);
    CHECK_THROWS_AS((void)haar_dwt(GrayImage(64, 20)), DataError);
}

// ---------------------------------------------------------------------------
// Wavelet block features
// ---------------------------------------------------------------------------

TEST_CASE("constant image block features are [8c, 0...0]") {
    const double c = 0.25;
    const WaveletPyramid pyr = haar_dwt(GrayImage(64, 64, c));
    const auto f = wavelet_block_features(pyr, 1, 2);
    CHECK(f[0] == doctest::Approx(8.0 * c).epsilon(1e-12));
    for (int i = 1; i < kWaveletFeatures; ++i) CHECK(std::abs(f[static_cast<size_t>(i)]) < 1e-12);
}

TEST_CASE("detail energy confined to one block leaves other blocks at zero") {
    GrayImage img(64, 64, 0.5);
    // checkerboard texture strictly inside block (1,1): pixels [16,32)x[16,32)
    for (int y = 16; y < 32; ++y)
        for (int x = 16; x < 32; ++x) img.at(x, y) = ((x + y) % 2 == 0) ? 0.9 : 0.1;
    const WaveletPyramid pyr = haar_dwt(img);
    const auto inside = wavelet_block_features(pyr, 1, 1);
    double detail_inside = 0.0;
    for (int i = 1; i < kWaveletFeatures; ++i) detail_inside += inside[static_cast<size_t>(i)];
    CHECK(detail_inside > 0.0);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            if (r == 1 && c == 1) continue;
            const auto f = wavelet_block_features(pyr, r, c);
            for (int i = 1; i < kWaveletFeatures; ++i)
                CHECK(std::abs(f[static_cast<size_t>(i)]) < 1e-12);
        }
}

TEST_CASE("block features equal an independent index-arithmetic oracle") {
    const GrayImage img = testutil::random_image(64, 64, 77);
    const WaveletPyramid pyr = haar_dwt(img);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            const auto f = wavelet_block_features(pyr, r, c);
            // oracle: direct mean-|.| over computed footprints
            auto mean_abs = [&](const Subband& band, int level) {
                const int side = 16 >> level;
                double acc = 0.0;
                for (int y = r * side; y < (r + 1) * side; ++y)
                    for (int x = c * side; x < (c + 1) * side; ++x)
                        acc += std::abs(band.data[static_cast<size_t>(y) * band.width + x]);
                return acc / (side * side);
            };
            CHECK(f[0] == doctest::Approx(mean_abs(pyr.ll, 3)).epsilon(1e-12));
            int idx = 1;
            for (int l = 0; l < 3; ++l) {
                CHECK(f[static_cast<size_t>(idx++)] ==
                      doctest::Approx(mean_abs(pyr.h[static_cast<size_t>(l)], l + 1)).epsilon(1e-12));
                CHECK(f[static_cast<size_t>(idx++)] ==
                      doctest::Approx(mean_abs(pyr.v[static_cast<size_t>(l)], l + 1)).epsilon(1e-12));
                CHECK(f[static_cast<size_t>(idx++)] ==
                      doctest::Approx(mean_abs(pyr.d[static_cast<size_t>(l)], l + 1)).epsilon(1e-12));
            }
        }
}

TEST_CASE("out-of-grid block features are rejected") {
    const WaveletPyramid pyr = haar_dwt(GrayImage(64, 64));
    CHECK_THROWS_AS((void)wavelet_block_features(pyr, 4, 0), DataError);
}

// ---------------------------------------------------------------------------
// Descriptor assembly
// ---------------------------------------------------------------------------

TEST_CASE("256x256 image yields 256 descriptors of length 54") {
    const GrayImage img = testutil::random_image(256, 256, 100);
    const DescriptorGrid grid = assemble_descriptor(img);
    CHECK(grid.rows == 16);
    CHECK(grid.cols == 16);
    CHECK(grid.blocks.size() == 256);
    static_assert(std::tuple_size_v<BlockDescriptor> == 54);
    for (const auto& d : grid.blocks)
        for (double v : d) CHECK(std::isfinite(v));
}

TEST_CASE("constant image descriptor composes the trivial parts") {
    const double c = 0.6;
    const DescriptorGrid grid = assemble_descriptor(GrayImage(64, 64, c));
    for (const auto& d : grid.blocks) {
        for (int i = 0; i < 36; ++i) CHECK(d[static_cast<size_t>(i)] == 0.0);
        CHECK(d[36] == doctest::Approx(c).epsilon(1e-12)); // raw mean
        CHECK(std::abs(d[37]) < 1e-18); // variance accumulates rounding dust
        CHECK(d[38] == 0.0);            // degenerate-variance convention
        CHECK(d[39] == 0.0);
        for (int i = 40; i < 44; ++i) CHECK(std::abs(d[static_cast<size_t>(i)]) < 1e-12);
        CHECK(d[44] == doctest::Approx(8.0 * c).epsilon(1e-12)); // LL3
        for (int i = 45; i < 54; ++i) CHECK(std::abs(d[static_cast<size_t>(i)]) < 1e-12);
    }
}

TEST_CASE("swapping interior content of two far-apart blocks swaps exactly their non-HOG features") {
    // random content strictly inside each block (2px margin) so the LoG halo
    // of neighboring blocks sees identical constant context either way
    const double bg = 0.5;
    GrayImage img(96, 96, bg);
    Rng rng(123);
    auto fill_block = [&](int r, int c) {
        for (int y = r * 16 + 2; y < (r + 1) * 16 - 2; ++y)
            for (int x = c * 16 + 2; x < (c + 1) * 16 - 2; ++x) img.at(x, y) = rng.next_double();
    };
    fill_block(1, 1);
    fill_block(4, 4);

    const DescriptorGrid before = assemble_descriptor(img);

    GrayImage swapped = img;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            std::swap(swapped.at(1 * 16 + j, 1 * 16 + i), swapped.at(4 * 16 + j, 4 * 16 + i));
        }
    const DescriptorGrid after = assemble_descriptor(swapped);

    auto non_hog_equal = [](const BlockDescriptor& a, const BlockDescriptor& b) {
        for (int i = 36; i < 54; ++i)
            if (a[static_cast<size_t>(i)] != b[static_cast<size_t>(i)]) return false;
        return true;
    };
    CHECK(non_hog_equal(before.at(1, 1), after.at(4, 4)));
    CHECK(non_hog_equal(before.at(4, 4), after.at(1, 1)));
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
            if ((r == 1 && c == 1) || (r == 4 && c == 4)) continue;
            CHECK(non_hog_equal(before.at(r, c), after.at(r, c)));
        }
}

TEST_CASE("adding a constant shifts only the raw mean") {
    const GrayImage img = testutil::random_image(64, 64, 55);
    GrayImage shifted = img;
    const double k = 0.125;
    for (double& v : shifted.data) v += k;
    const DescriptorGrid a = assemble_descriptor(img);
    const DescriptorGrid b = assemble_descriptor(shifted);
    for (size_t blk = 0; blk < a.blocks.size(); ++blk) {
        CHECK(b.blocks[blk][36] ==
              doctest::Approx(a.blocks[blk][36] + k).epsilon(1e-10)); // raw mean
        for (int i = 37; i < 44; ++i)                                  // other moments unchanged
            CHECK(b.blocks[blk][static_cast<size_t>(i)] ==
                  doctest::Approx(a.blocks[blk][static_cast<size_t>(i)]).epsilon(1e-8));
    }
}

TEST_SUITE_END();
