#include <doctest.h>

#include <cmath>
#include <fstream>

#include "museg/boosting.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace museg;
using namespace museg::boosting;

namespace {

features::BlockDescriptor desc_with(double f0, std::uint64_t seed = 0) {
    features::BlockDescriptor d{};
    if (seed) {
        Rng rng(seed);
        for (double& v : d) v = rng.next_double();
    }
    d[0] = f0;
    return d;
}

TrainingSet random_training_set(size_t n, std::uint64_t seed) {
    TrainingSet ts;
    Rng rng(seed);
    for (size_t i = 0; i < n; ++i) {
        features::BlockDescriptor d;
        for (double& v : d) v = rng.next_double();
        ts.x.push_back(d);
        ts.y.push_back(rng.next_double() < 0.5 ? -1 : 1);
    }
    // ensure both classes
    ts.y[0] = 1;
    ts.y[1] = -1;
    return ts;
}

} // namespace

TEST_SUITE_BEGIN("boosting");

// ---------------------------------------------------------------------------
// Erosion / block labels / mask reconstruction
// ---------------------------------------------------------------------------

TEST_CASE("erosion with radius 0 is the identity") {
    const LabelMask mask = testutil::random_mask(20, 20, 3, 9);
    const LabelMask out = erode_labels(mask, 0);
    CHECK(out.labels == mask.labels);
}

TEST_CASE("3x3 square eroded by a radius-1 disk leaves the center pixel") {
    LabelMask mask(9, 9);
    for (int y = 3; y < 6; ++y)
        for (int x = 3; x < 6; ++x) mask.at(x, y) = 1;
    const LabelMask out = erode_labels(mask, 1);
    int count = 0;
    for (auto v : out.labels) count += v != 0;
    CHECK(count == 1);
    CHECK(out.at(4, 4) == 1);
}

TEST_CASE("eroded support is a subset of the original, per label") {
    const LabelMask mask = testutil::random_mask(32, 32, 4, 17);
    for (int radius : {1, 2, 3}) {
        const LabelMask out = erode_labels(mask, radius);
        const LabelMask ref = oracle::naive_erode(mask, radius);
        CHECK(out.labels == ref.labels);
        for (size_t i = 0; i < mask.labels.size(); ++i)
            if (out.labels[i] != 0) CHECK(out.labels[i] == mask.labels[i]);
    }
}

TEST_CASE("block labels: full block positive, exact tie negative, majority positive") {
    LabelMask mask(32, 16);
    // block (0,0): all 256 muscle pixels
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) mask.at(x, y) = 1;
    // block (0,1): exactly 128 muscle pixels
    for (int y = 0; y < 8; ++y)
        for (int x = 16; x < 32; ++x) mask.at(x, y) = 2;
    const preproc::BlockGrid grid = preproc::grid_of(GrayImage(32, 16));
    const auto labels = derive_block_labels(mask, grid);
    REQUIRE(labels.size() == 2);
    CHECK(labels[0] == 1);
    CHECK(labels[1] == -1); // tie goes negative

    // 200 of 256 -> positive
    LabelMask majority(16, 16);
    int painted = 0;
    for (int y = 0; y < 16 && painted < 200; ++y)
        for (int x = 0; x < 16 && painted < 200; ++x) {
            majority.at(x, y) = 3;
            ++painted;
        }
    const auto l2 = derive_block_labels(majority, preproc::grid_of(GrayImage(16, 16)));
    CHECK(l2[0] == 1);
}

TEST_CASE("blocks_to_mask paints footprints and round-trips through derive_block_labels") {
    const preproc::BlockGrid grid = preproc::grid_of(GrayImage(64, 48));
    Rng rng(33);
    std::vector<int> labels(static_cast<size_t>(grid.rows) * grid.cols);
    for (int& l : labels) l = rng.next_double() < 0.5 ? -1 : 1;

    const LabelMask mask = blocks_to_mask(labels, grid, 64, 48);
    CHECK(derive_block_labels(mask, grid) == labels);

    std::vector<int> single(labels.size(), -1);
    single[0] = 1;
    const LabelMask one = blocks_to_mask(single, grid, 64, 48);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 64; ++x)
            CHECK(static_cast<int>(one.at(x, y)) == ((x < 16 && y < 16) ? 1 : 0));
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TEST_CASE("1-D separable data trains to zero error in one round") {
    TrainingSet ts;
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        ts.x.push_back(desc_with(rng.next_double() - 2.0)); // negatives below 0
        ts.y.push_back(-1);
        ts.x.push_back(desc_with(1.0 + rng.next_double())); // positives above 1
        ts.y.push_back(1);
    }
    std::vector<RoundInfo> history;
    const StrongClassifier clf = train_adaboost(ts, 500, &history);
    REQUIRE(clf.rounds.size() == 1); // eps hit 0, recorded, stopped
    CHECK(history[0].eps == 0.0);
    CHECK(history[0].train_err == 0.0);
    CHECK(clf.rounds[0].stump.feature == 0);
}

TEST_CASE("single-class and empty inputs are rejected") {
    TrainingSet ts;
    CHECK_THROWS_AS((void)train_adaboost(ts, 10), DataError);
    ts.x.push_back(desc_with(0.0));
    ts.y.push_back(1);
    ts.x.push_back(desc_with(1.0));
    ts.y.push_back(1);
    CHECK_THROWS_AS((void)train_adaboost(ts, 10), DataError);
}

TEST_CASE("selected stump error stays below 0.5 and weights stay a distribution") {
    TrainingSet ts = random_training_set(200, 44);
    std::vector<RoundInfo> history;
    (void)train_adaboost(ts, 40, &history, [](const RoundInfo& info) {
        CHECK(info.eps < 0.5);
        CHECK(info.weight_sum == doctest::Approx(1.0).epsilon(1e-9));
    });
    CHECK(!history.empty());
}

TEST_CASE("exponential loss is non-increasing over rounds") {
    TrainingSet ts = random_training_set(150, 91);
    std::vector<RoundInfo> history;
    (void)train_adaboost(ts, 60, &history);
    for (size_t i = 1; i < history.size(); ++i)
        CHECK(history[i].exp_loss <= history[i - 1].exp_loss + 1e-12);
}

TEST_CASE("round-1 stump equals exhaustive brute-force search on N=40 sets") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        TrainingSet ts = random_training_set(40, seed);
        std::vector<RoundInfo> history;
        const StrongClassifier clf = train_adaboost(ts, 1, &history);
        REQUIRE(clf.rounds.size() == 1);

        const std::vector<double> w(40, 1.0 / 40.0);
        const auto ref = oracle::brute_stump_search(ts.x, ts.y, w, features::kDescriptorLength);
        CHECK(clf.rounds[0].stump.feature == ref.feature);
        CHECK(clf.rounds[0].stump.threshold == ref.threshold);
        CHECK(clf.rounds[0].stump.polarity == ref.polarity);
        CHECK(history[0].eps == doctest::Approx(ref.eps).epsilon(1e-12));
    }
}

TEST_CASE("training is deterministic") {
    TrainingSet ts = random_training_set(120, 1234);
    const StrongClassifier a = train_adaboost(ts, 25);
    const StrongClassifier b = train_adaboost(ts, 25);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (size_t i = 0; i < a.rounds.size(); ++i) {
        CHECK(a.rounds[i].stump.feature == b.rounds[i].stump.feature);
        CHECK(a.rounds[i].stump.threshold == b.rounds[i].stump.threshold);
        CHECK(a.rounds[i].stump.polarity == b.rounds[i].stump.polarity);
        CHECK(a.rounds[i].alpha == b.rounds[i].alpha);
    }
}

TEST_CASE("flipping all labels exactly negates training-set scores") {
    TrainingSet ts = random_training_set(80, 70);
    TrainingSet flipped = ts;
    for (int& y : flipped.y) y = -y;
    const StrongClassifier a = train_adaboost(ts, 15);
    const StrongClassifier b = train_adaboost(flipped, 15);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (const auto& d : ts.x) CHECK(a.score(d) == -b.score(d));
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

TEST_CASE("single stump scores +alpha below threshold; opposing pair ties to -1") {
    StrongClassifier clf;
    clf.requested_rounds = 2;
    clf.rounds.push_back({{0, 0.5, 1}, 0.8});

    features::DescriptorGrid grid;
    grid.rows = 1;
    grid.cols = 2;
    grid.blocks = {desc_with(1.0), desc_with(0.2)};
    // stump is (x[0] <= 0.5 ? + : -): block 0 above, block 1 below
    const BlockPrediction p = predict_blocks(clf, grid);
    CHECK(p.score[0] == doctest::Approx(-0.8));
    CHECK(p.label[0] == -1);
    CHECK(p.score[1] == doctest::Approx(0.8));
    CHECK(p.label[1] == 1);

    clf.rounds.push_back({{0, 0.5, -1}, 0.8}); // negated duplicate: scores cancel
    const BlockPrediction q = predict_blocks(clf, grid);
    CHECK(q.score[0] == 0.0);
    CHECK(q.label[0] == -1); // sign(0) = -1
    CHECK(q.score[1] == 0.0);
    CHECK(q.label[1] == -1);
}

TEST_CASE("exponential loss obeys the AdaBoost product bound") {
    TrainingSet ts = random_training_set(100, 2024);
    std::vector<RoundInfo> history;
    const StrongClassifier clf = train_adaboost(ts, 30, &history);
    REQUIRE(!history.empty());
    double bound = 1.0;
    for (const auto& r : history) {
        const double eps_hat = std::clamp(r.eps, 1e-10, 1.0 - 1e-10);
        bound *= 2.0 * std::sqrt(eps_hat * (1.0 - eps_hat));
    }
    CHECK(history.back().exp_loss <= bound + 1e-9);
    (void)clf;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

TEST_CASE("model JSON round-trip is lossless") {
    testutil::TempDir td("model");
    TrainingSet ts = random_training_set(60, 5150);
    const StrongClassifier clf = train_adaboost(ts, 12);
    save_model(clf, td.path("model.json"));
    const StrongClassifier back = load_model(td.path("model.json"));
    REQUIRE(back.rounds.size() == clf.rounds.size());
    CHECK(back.requested_rounds == clf.requested_rounds);
    for (size_t i = 0; i < clf.rounds.size(); ++i) {
        CHECK(back.rounds[i].stump.feature == clf.rounds[i].stump.feature);
        CHECK(back.rounds[i].stump.threshold == clf.rounds[i].stump.threshold);
        CHECK(back.rounds[i].stump.polarity == clf.rounds[i].stump.polarity);
        CHECK(back.rounds[i].alpha == clf.rounds[i].alpha);
    }
}

TEST_CASE("training report has the pinned CSV header") {
    testutil::TempDir td("report");
    std::vector<RoundInfo> history = {{1, 0.25, 0.5493, 0.1, 0.8, 1.0}};
    save_training_report(history, td.path("r.csv"));
    std::ifstream in(td.path("r.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,eps,alpha,train_err,exp_loss");
}

TEST_SUITE_END();
