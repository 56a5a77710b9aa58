#include <doctest.h>

#include <cmath>
#include <random>

#include "gcnn/train.hpp"

using namespace gcnn;

TEST_CASE("binary cross-entropy closed forms") {
    auto [l_half, g_half] = bce_loss(0.5, 1);
    CHECK(l_half == doctest::Approx(std::log(2.0)));
    CHECK(g_half == doctest::Approx(-0.5));

    auto [l_right, g_right] = bce_loss(0.9, 1);
    CHECK(l_right == doctest::Approx(-std::log(0.9)));
    CHECK(g_right == doctest::Approx(-0.1));

    auto [l_wrong, g_wrong] = bce_loss(0.9, 0);
    CHECK(l_wrong == doctest::Approx(-std::log(0.1)));
    CHECK(g_wrong == doctest::Approx(0.9));

    // Clamping keeps extreme predictions finite.
    auto [l_ext, g_ext] = bce_loss(1.0, 0);
    CHECK(std::isfinite(l_ext));
    CHECK(g_ext == doctest::Approx(1.0));
}

TEST_CASE("categorical cross-entropy closed forms") {
    const std::vector<double> uniform = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    auto [l, g] = cce_loss(uniform, 2);
    CHECK(l == doctest::Approx(std::log(3.0)));
    CHECK(g[0] == doctest::Approx(1.0 / 3));
    CHECK(g[1] == doctest::Approx(1.0 / 3));
    CHECK(g[2] == doctest::Approx(1.0 / 3 - 1.0));
}

TEST_CASE("Adam first steps match an independent recurrence") {
    // Single scalar parameter, constant gradient 1. The reference values
    // come from unrolling m_t, v_t, and the bias corrections by hand.
    nn::Tensor<double> w({1}), dw({1});
    w.data = {0.0};
    nn::Adam<double> opt({{&w, &dw}}, 0.1, 0.9, 0.999, 1e-8);

    double m = 0.0, v = 0.0, ref = 0.0;
    for (int t = 1; t <= 5; ++t) {
        dw.data[0] = 1.0;
        opt.step();
        m = 0.9 * m + 0.1 * 1.0;
        v = 0.999 * v + 0.001 * 1.0;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        ref -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
        CHECK(w.data[0] == doctest::Approx(ref).epsilon(1e-12));
    }
    // First step of Adam with constant gradient is ~ -lr regardless of
    // gradient scale.
    CHECK(std::abs(w.data[0] + 0.1 * 5) < 0.01);
}

TEST_CASE("Adam descends a convex quadratic") {
    nn::Tensor<double> w({1}), dw({1});
    w.data = {10.0};
    nn::Adam<double> opt({{&w, &dw}}, 0.05);
    for (int i = 0; i < 3000; ++i) {
        dw.data[0] = 2.0 * (w.data[0] - 3.0);  // d/dw (w-3)^2
        opt.step();
    }
    CHECK(w.data[0] == doctest::Approx(3.0).epsilon(1e-3));
}

namespace {

// Tiny linearly separable segment set: class 0 rows hover near -1, class 1
// rows near +1, with mild noise.
std::vector<FeatureMatrix> make_separable(int per_class, int rows, int cols,
                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<FeatureMatrix> mats;
    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            FeatureMatrix m;
            m.rows = rows;
            m.cols = cols;
            m.v.resize(static_cast<std::size_t>(rows) * cols);
            const double base = cls == 0 ? -1.0 : 1.0;
            for (auto& v : m.v) v = static_cast<float>(base + noise(rng));
            mats.push_back(std::move(m));
        }
    }
    return mats;
}

}  // namespace

TEST_CASE("training separates an easy synthetic problem and is deterministic") {
    const int rows = 8, cols = 24, per_class = 16;
    const auto mats = make_separable(per_class, rows, cols, 5);
    std::vector<TrainSegment> segments;
    std::vector<const FeatureMatrix*> ptrs;
    for (int i = 0; i < 2 * per_class; ++i) {
        segments.push_back({&mats[static_cast<std::size_t>(i)], i < per_class ? 0 : 1});
        ptrs.push_back(&mats[static_cast<std::size_t>(i)]);
    }
    const RowStats stats = compute_fold_stats(ptrs);

    ModelConfig mcfg;
    mcfg.num_blocks = 2;
    mcfg.kernels = 8;
    mcfg.dense_units = 16;
    mcfg.input_rows = rows;
    mcfg.input_frames = cols;
    TrainConfig tcfg;
    tcfg.epochs = 14;
    tcfg.batch_size = 16;
    tcfg.seed = 9;

    std::vector<EpochLogEntry> log;
    nn::Model<float> model = train_fold(segments, mcfg, tcfg, stats, &log);
    REQUIRE(!log.empty());

    int correct = 0;
    for (const TrainSegment& s : segments) {
        const FeatureMatrix m = assemble_feature_matrix(*s.features, cols, &stats);
        if (predict_segment(model, m).label == s.label) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(segments.size()) >= 0.95);

    // Same data, same seed: bitwise-identical weights.
    nn::Model<float> again = train_fold(segments, mcfg, tcfg, stats);
    auto pa = model.params();
    auto pb = again.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].value->data == pb[i].value->data);

    // Different seed: (almost surely) different weights.
    tcfg.seed = 10;
    nn::Model<float> other = train_fold(segments, mcfg, tcfg, stats);
    bool any_diff = false;
    auto pc = other.params();
    for (std::size_t i = 0; i < pa.size() && !any_diff; ++i)
        any_diff = pa[i].value->data != pc[i].value->data;
    CHECK(any_diff);
}

TEST_CASE("training rejects invalid labels") {
    FeatureMatrix m;
    m.rows = 4;
    m.cols = 8;
    m.v.assign(32, 0.0f);
    std::vector<TrainSegment> segments = {{&m, 2}};
    ModelConfig mcfg;
    mcfg.num_blocks = 1;
    mcfg.kernels = 4;
    mcfg.input_rows = 4;
    mcfg.input_frames = 8;
    RowStats stats;
    stats.mean.assign(4, 0.0f);
    stats.stddev.assign(4, 1.0f);
    CHECK_THROWS_AS(train_fold(segments, mcfg, TrainConfig{}, stats), OutOfRangeError);
    CHECK_THROWS_AS(train_fold({}, mcfg, TrainConfig{}, stats), EmptyInputError);
}
