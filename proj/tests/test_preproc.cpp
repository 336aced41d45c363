#include <doctest.h>

#include <cmath>

#include "museg/preproc.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace museg;
using preproc::BlockGrid;
using preproc::LogKernel;

TEST_SUITE_BEGIN("preproc");

TEST_CASE("LoG kernel: zero sum, 90-degree symmetry, analytic center tap") {
    const LogKernel k = preproc::log_kernel(5, 1.5);
    double sum = 0.0;
    for (double t : k.taps) sum += t;
    CHECK(std::abs(sum) < 1e-9);

    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            CHECK(k.at(i, j) == doctest::Approx(k.at(j, i)).epsilon(1e-15));
            CHECK(k.at(i, j) == doctest::Approx(k.at(4 - i, 4 - j)).epsilon(1e-15));
        }

    // center tap before the mean shift is -1/(pi sigma^4)
    const double sigma = 1.5;
    const double expected_center = -1.0 / (M_PI * sigma * sigma * sigma * sigma);
    CHECK(preproc::log_tap(0, 0, sigma) == doctest::Approx(expected_center).epsilon(1e-12));
    // mean shift moved every tap by the same amount
    const double shift = preproc::log_tap(0, 0, sigma) - k.at(2, 2);
    CHECK(preproc::log_tap(2, 2, sigma) - k.at(0, 0) == doctest::Approx(shift).epsilon(1e-12));
}

TEST_CASE("LoG kernel rejects bad parameters") {
    CHECK_THROWS_AS((void)preproc::log_kernel(4, 1.5), DataError);
    CHECK_THROWS_AS((void)preproc::log_kernel(1, 1.5), DataError);
    CHECK_THROWS_AS((void)preproc::log_kernel(5, 0.0), DataError);
    CHECK_THROWS_AS((void)preproc::log_kernel(5, -1.0), DataError);
}

TEST_CASE("constant image filters to identically zero") {
    const LogKernel k = preproc::log_kernel(5, 1.5);
    const GrayImage img(20, 12, 0.37);
    const GrayImage resp = preproc::log_filter(img, k);
    for (double v : resp.data) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("unit impulse reproduces the kernel taps around the center") {
    const LogKernel k = preproc::log_kernel(5, 1.5);
    GrayImage img(11, 11, 0.0);
    img.at(5, 5) = 1.0;
    const GrayImage resp = preproc::log_filter(img, k);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            // correlation of an impulse mirrors the kernel; LoG is symmetric
            CHECK(resp.at(5 + j - 2, 5 + i - 2) == doctest::Approx(k.at(i, j)).epsilon(1e-12));
        }
}

TEST_CASE("filter equals brute-force convolution on random 32x32 images") {
    const LogKernel k = preproc::log_kernel(5, 1.5);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const GrayImage img = testutil::random_image(32, 32, seed);
        const GrayImage fast = preproc::log_filter(img, k);
        const GrayImage ref = oracle::naive_correlate(img, k.taps, k.size);
        for (size_t i = 0; i < img.size(); ++i)
            CHECK(std::abs(fast.data[i] - ref.data[i]) < 1e-12);
    }
}

TEST_CASE("filter is linear on random images") {
    const LogKernel k = preproc::log_kernel(5, 1.5);
    const GrayImage x = testutil::random_image(24, 24, 10);
    const GrayImage y = testutil::random_image(24, 24, 11);
    const double a = 0.7, b = -1.3;
    GrayImage combo(24, 24);
    for (size_t i = 0; i < combo.size(); ++i) combo.data[i] = a * x.data[i] + b * y.data[i];
    const GrayImage fx = preproc::log_filter(x, k);
    const GrayImage fy = preproc::log_filter(y, k);
    const GrayImage fc = preproc::log_filter(combo, k);
    for (size_t i = 0; i < combo.size(); ++i)
        CHECK(std::abs(fc.data[i] - (a * fx.data[i] + b * fy.data[i])) < 1e-10);
}

TEST_CASE("filter rejects images smaller than the kernel") {
    const LogKernel k = preproc::log_kernel(5, 1.5);
    CHECK_THROWS_AS((void)preproc::log_filter(GrayImage(4, 10), k), DataError);
}

TEST_CASE("grid: 256x256 gives 16x16 blocks; 17x17 gives a single block") {
    const BlockGrid g256 = preproc::grid_of(GrayImage(256, 256));
    CHECK(g256.rows == 16);
    CHECK(g256.cols == 16);

    const BlockGrid g17 = preproc::grid_of(GrayImage(17, 17));
    CHECK(g17.rows == 1);
    CHECK(g17.cols == 1);
    CHECK(g17.covered_width() == 16);
}

TEST_CASE("grid rejects images smaller than one block and bad indices") {
    CHECK_THROWS_AS((void)preproc::grid_of(GrayImage(15, 40)), DataError);
    const GrayImage img(32, 32);
    const BlockGrid g = preproc::grid_of(img);
    CHECK_THROWS_AS((void)preproc::block_view(img, g, 2, 0), DataError);
    CHECK_THROWS_AS((void)preproc::block_view(img, g, 0, -1), DataError);
}

TEST_CASE("tiles reassemble the covered region exactly") {
    const GrayImage img = testutil::random_image(40, 33, 99); // grid 2x2, covers 32x32
    const BlockGrid g = preproc::grid_of(img);
    REQUIRE(g.rows == 2);
    REQUIRE(g.cols == 2);
    GrayImage rebuilt(g.covered_width(), g.covered_height());
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) {
            const auto tile = preproc::block_view(img, g, r, c);
            for (int i = 0; i < 16; ++i)
                for (int j = 0; j < 16; ++j)
                    rebuilt.at(c * 16 + j, r * 16 + i) = tile[static_cast<size_t>(i) * 16 + j];
        }
    for (int y = 0; y < rebuilt.height; ++y)
        for (int x = 0; x < rebuilt.width; ++x) CHECK(rebuilt.at(x, y) == img.at(x, y));
}

TEST_SUITE_END();
