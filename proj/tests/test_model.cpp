#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "gcnn/model.hpp"
#include "grad_check.hpp"

using namespace gcnn;
using gradcheck::LinearLoss;
using gradcheck::check_tensor;
using gradcheck::fill_uniform;

namespace {

nn::Tensor<float> random_input(const ModelConfig& cfg, std::uint64_t seed) {
    nn::Rng rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    nn::Tensor<float> x;
    x.reset({2, static_cast<std::size_t>(cfg.input_rows),
             static_cast<std::size_t>(cfg.input_frames)});
    for (auto& v : x.data) v = static_cast<float>(dist(rng));
    return x;
}

}  // namespace

TEST_CASE("pooled lengths follow repeated ceil-halving from 397") {
    const std::vector<int> lens = pooled_lengths(397, 10);
    const std::vector<int> expected = {397, 199, 100, 50, 25, 13, 7, 4, 2, 1, 1};
    CHECK(lens == expected);

    ModelConfig cfg;
    cfg.num_blocks = 8;
    CHECK(flatten_size(cfg) == 64 * 2);  // 8 blocks end at length 2
    cfg.num_blocks = 6;
    CHECK(flatten_size(cfg) == 64 * 7);
    cfg.num_blocks = 10;
    CHECK(flatten_size(cfg) == 64 * 1);
}

TEST_CASE("first block maps 76x397 to 64x199") {
    ModelConfig cfg;
    cfg.num_blocks = 1;
    nn::Rng rng(1);
    nn::GatedBlock<float> block(76, 64, 2);
    block.init(rng);
    nn::Tensor<float> x;
    x.reset({1, 76, 397});
    const auto y = block.forward(x, true);
    CHECK(y.dim(1) == 64);
    CHECK(y.dim(2) == 199);
}

TEST_CASE("model emits valid probabilities across block depths") {
    for (int blocks : {6, 8, 10}) {
        ModelConfig cfg;
        cfg.num_blocks = blocks;
        cfg.kernels = 16;  // reduced width; depth and shapes are the point
        nn::Model<float> model(cfg);
        nn::Rng rng(blocks);
        model.init(rng);
        for (int trial = 0; trial < 3; ++trial) {
            const auto x = random_input(cfg, static_cast<std::uint64_t>(blocks * 10 + trial));
            nn::Rng drop_rng(0);
            const auto p = model.forward(x, false, drop_rng);
            REQUIRE(p.dim(0) == 2);
            REQUIRE(p.dim(1) == 1);
            for (float v : p.data) {
                CHECK(std::isfinite(v));
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }
    }
}

TEST_CASE("three-class head produces a distribution") {
    ModelConfig cfg;
    cfg.num_blocks = 2;
    cfg.kernels = 8;
    cfg.classes = 3;
    cfg.input_frames = 50;
    nn::Model<float> model(cfg);
    nn::Rng rng(5);
    model.init(rng);
    nn::Tensor<float> x;
    x.reset({3, 76, 50});
    for (auto& v : x.data) v = 0.1f;
    nn::Rng drop_rng(0);
    const auto p = model.forward(x, false, drop_rng);
    REQUIRE(p.dim(1) == 3);
    for (std::size_t b = 0; b < 3; ++b) {
        float sum = 0.0f;
        for (std::size_t c = 0; c < 3; ++c) sum += p.data[b * 3 + c];
        CHECK(sum == doctest::Approx(1.0f));
    }
}

TEST_CASE("reduced full model passes a finite-difference gradient check") {
    // 2 blocks, K=4, F=6, T=16, double precision, dropout off so the
    // network is deterministic under perturbation.
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        ModelConfig cfg;
        cfg.num_blocks = 2;
        cfg.kernels = 4;
        cfg.dense_units = 5;
        cfg.dropout_p = 0.0f;
        cfg.input_rows = 6;
        cfg.input_frames = 16;
        nn::Model<double> model(cfg);
        nn::Rng rng(seed);
        model.init(rng);

        nn::Tensor<double> x;
        x.reset({2, 6, 16});
        std::mt19937_64 xrng(seed + 77);
        fill_uniform(x, xrng);

        nn::Rng drop_rng(0);
        // Loss on the logits (linear head output) to avoid saturating the
        // sigmoid during differencing.
        LinearLoss loss(2 * 1, xrng);
        auto run = [&] {
            nn::Rng r(0);
            model.forward(x, true, r);
            return loss.value(model.logits());
        };
        run();
        model.zero_grads();
        model.backward(loss.grad({2, 1}));

        double worst = 0.0;
        for (auto p : model.params()) {
            worst = std::max(worst, check_tensor(*p.value, *p.grad, run, 1e-4));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("initialization and forward are deterministic given a seed") {
    ModelConfig cfg;
    cfg.num_blocks = 2;
    cfg.kernels = 8;
    cfg.input_frames = 40;
    nn::Model<float> a(cfg), b(cfg);
    nn::Rng ra(42), rb(42);
    a.init(ra);
    b.init(rb);
    nn::Tensor<float> x;
    x.reset({1, 76, 40});
    for (std::size_t i = 0; i < x.count(); ++i)
        x.data[i] = static_cast<float>(std::sin(0.01 * static_cast<double>(i)));
    nn::Rng da(0), db(0);
    const auto pa = a.forward(x, false, da);
    const auto pb = b.forward(x, false, db);
    CHECK(pa.data == pb.data);
}

TEST_CASE("weight files round-trip the model and feature statistics") {
    ModelConfig cfg;
    cfg.num_blocks = 2;
    cfg.kernels = 8;
    cfg.input_frames = 40;
    nn::Model<float> model(cfg);
    nn::Rng rng(7);
    model.init(rng);

    // Push the batch-norm layers through a training step so running stats
    // and step counters are non-trivial.
    nn::Tensor<float> batch;
    batch.reset({4, 76, 40});
    std::mt19937_64 brng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : batch.data) v = static_cast<float>(dist(brng));
    nn::Rng drop_rng(1);
    model.forward(batch, true, drop_rng);

    RowStats stats;
    for (int r = 0; r < 76; ++r) {
        stats.mean.push_back(static_cast<float>(r) * 0.5f);
        stats.stddev.push_back(1.0f + static_cast<float>(r) * 0.01f);
    }

    const std::string path =
        (std::filesystem::temp_directory_path() / "gcnn_model_roundtrip.gcnn").string();
    save_model(path, model, &stats);
    LoadedModel loaded = load_model(path);
    REQUIRE(loaded.stats.has_value());
    CHECK(loaded.stats->mean == stats.mean);
    CHECK(loaded.stats->stddev == stats.stddev);
    CHECK(loaded.model.config().num_blocks == 2);
    CHECK(loaded.model.config().kernels == 8);

    FeatureMatrix feat;
    feat.rows = 76;
    feat.cols = 40;
    feat.v.assign(76 * 40, 0.0f);
    for (std::size_t i = 0; i < feat.v.size(); ++i)
        feat.v[i] = static_cast<float>(dist(brng));
    const Prediction p1 = predict_segment(model, feat);
    const Prediction p2 = predict_segment(loaded.model, feat);
    CHECK(p1.label == p2.label);
    REQUIRE(p1.probabilities.size() == p2.probabilities.size());
    for (std::size_t i = 0; i < p1.probabilities.size(); ++i)
        CHECK(p1.probabilities[i] == p2.probabilities[i]);
    std::filesystem::remove(path);
}

TEST_CASE("prediction labels follow the probability threshold") {
    ModelConfig cfg;
    cfg.num_blocks = 1;
    cfg.kernels = 4;
    cfg.input_frames = 8;
    cfg.input_rows = 4;
    nn::Model<float> model(cfg);
    nn::Rng rng(11);
    model.init(rng);
    FeatureMatrix feat;
    feat.rows = 4;
    feat.cols = 8;
    feat.v.assign(32, 0.25f);
    const Prediction p = predict_segment(model, feat);
    REQUIRE(p.probabilities.size() == 2);
    CHECK(p.probabilities[0] + p.probabilities[1] == doctest::Approx(1.0f));
    CHECK(p.label == (p.probabilities[1] >= 0.5f ? 1 : 0));
}
