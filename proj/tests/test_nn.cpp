#include <doctest.h>

#include <random>

#include "gcnn/nn.hpp"
#include "grad_check.hpp"

using namespace gcnn::nn;
using gradcheck::LinearLoss;
using gradcheck::check_tensor;
using gradcheck::fill_uniform;

namespace {
constexpr double kTol = 1e-4;
constexpr double kH = 1e-4;
}  // namespace

TEST_CASE("conv1d computes the causal two-tap sum") {
    // 1 channel in/out, w = [2, 3] (current, previous), bias 1:
    // y[t] = 1 + 2 x[t] + 3 x[t-1], x[-1] = 0.
    Conv1d<double> conv(1, 1, 2);
    conv.weight.data = {2.0, 3.0};
    conv.bias.data = {1.0};
    Tensor<double> x({1, 1, 4});
    x.data = {1.0, 2.0, 3.0, 4.0};
    const Tensor<double> y = conv.forward(x);
    CHECK(y.data[0] == doctest::Approx(3.0));
    CHECK(y.data[1] == doctest::Approx(8.0));
    CHECK(y.data[2] == doctest::Approx(13.0));
    CHECK(y.data[3] == doctest::Approx(18.0));
    CHECK_THROWS_AS(conv.forward(Tensor<double>({1, 2, 4})), gcnn::ShapeMismatchError);
}

TEST_CASE("conv1d gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        Conv1d<double> conv(3, 4, 2);
        conv.init(rng);
        fill_uniform(conv.bias, rng);
        Tensor<double> x({2, 3, 7});
        fill_uniform(x, rng);
        LinearLoss loss(2 * 4 * 7, rng);

        auto run = [&] { return loss.value(conv.forward(x)); };
        run();
        conv.zero_grads();
        const Tensor<double> dx = conv.backward(loss.grad({2, 4, 7}));

        CHECK(check_tensor(x, dx, run, kH) < kTol);
        CHECK(check_tensor(conv.weight, conv.dweight, run, kH) < kTol);
        CHECK(check_tensor(conv.bias, conv.dbias, run, kH) < kTol);
    }
}

TEST_CASE("batchnorm training output has zero mean and unit variance") {
    std::mt19937_64 rng(3);
    BatchNorm<double> bn(2);
    Tensor<double> x({4, 2, 5});
    fill_uniform(x, rng, -3.0, 5.0);
    const Tensor<double> y = bn.forward(x, true);
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t t = 0; t < 5; ++t) mean += y.data[(b * 2 + c) * 5 + t];
        mean /= 20.0;
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t t = 0; t < 5; ++t) {
                const double d = y.data[(b * 2 + c) * 5 + t] - mean;
                var += d * d;
            }
        var /= 20.0;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("batchnorm inference uses bias-corrected running statistics") {
    std::mt19937_64 rng(4);
    BatchNorm<double> bn(1);
    Tensor<double> x({8, 1, 4});
    for (std::size_t i = 0; i < x.count(); ++i) x.data[i] = 10.0 + 0.5 * (i % 4);
    // Same batch many times: the bias-corrected EMA converges to the batch
    // moments, so inference output matches training normalization.
    Tensor<double> train_y;
    for (int i = 0; i < 5; ++i) train_y = bn.forward(x, true);
    const Tensor<double> infer_y = bn.forward(x, false);
    for (std::size_t i = 0; i < x.count(); ++i)
        CHECK(infer_y.data[i] == doctest::Approx(train_y.data[i]).epsilon(1e-9));
}

TEST_CASE("batchnorm gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed + 100);
        BatchNorm<double> bn(3);
        fill_uniform(bn.gamma, rng, 0.5, 1.5);
        fill_uniform(bn.beta, rng);
        Tensor<double> x({2, 3, 4});
        fill_uniform(x, rng);
        LinearLoss loss(2 * 3 * 4, rng);

        auto run = [&] { return loss.value(bn.forward(x, true)); };
        run();
        bn.zero_grads();
        const Tensor<double> dx = bn.backward(loss.grad({2, 3, 4}));

        CHECK(check_tensor(x, dx, run, kH) < kTol);
        CHECK(check_tensor(bn.gamma, bn.dgamma, run, kH) < kTol);
        CHECK(check_tensor(bn.beta, bn.dbeta, run, kH) < kTol);
    }
}

TEST_CASE("max pooling halves with ceil mode") {
    MaxPoolHalve<double> pool;
    Tensor<double> x({1, 1, 5});
    x.data = {1.0, 3.0, 2.0, 5.0, 4.0};
    const Tensor<double> y = pool.forward(x);
    REQUIRE(y.dim(2) == 3);  // ceil(5/2)
    CHECK(y.data[0] == 3.0);
    CHECK(y.data[1] == 5.0);
    CHECK(y.data[2] == 4.0);  // trailing odd element passes through

    Tensor<double> dy({1, 1, 3});
    dy.data = {1.0, 1.0, 1.0};
    const Tensor<double> dx = pool.backward(dy);
    CHECK(dx.data == std::vector<double>{0.0, 1.0, 0.0, 1.0, 1.0});

    // Repeated ceil-halving never reaches zero length.
    std::size_t len = 397;
    for (int i = 0; i < 20; ++i) {
        len = (len + 1) / 2;
        CHECK(len >= 1);
    }
}

TEST_CASE("max pooling gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed + 200);
        MaxPoolHalve<double> pool;
        Tensor<double> x({2, 2, 7});
        fill_uniform(x, rng);
        LinearLoss loss(2 * 2 * 4, rng);
        auto run = [&] { return loss.value(pool.forward(x)); };
        run();
        const Tensor<double> dx = pool.backward(loss.grad({2, 2, 4}));
        CHECK(check_tensor(x, dx, run, 1e-6) < 1e-3);  // tiny h: kinks at ties
    }
}

TEST_CASE("dense layer forward and gradients") {
    Dense<double> d(2, 1);
    d.weight.data = {3.0, -2.0};
    d.bias.data = {0.5};
    Tensor<double> x({1, 2});
    x.data = {1.0, 2.0};
    CHECK(d.forward(x).data[0] == doctest::Approx(-0.5));

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed + 300);
        Dense<double> dense(5, 3);
        dense.init(rng);
        fill_uniform(dense.bias, rng);
        Tensor<double> xs({4, 5});
        fill_uniform(xs, rng);
        LinearLoss loss(4 * 3, rng);
        auto run = [&] { return loss.value(dense.forward(xs)); };
        run();
        dense.zero_grads();
        const Tensor<double> dx = dense.backward(loss.grad({4, 3}));
        CHECK(check_tensor(xs, dx, run, kH) < kTol);
        CHECK(check_tensor(dense.weight, dense.dweight, run, kH) < kTol);
        CHECK(check_tensor(dense.bias, dense.dbias, run, kH) < kTol);
    }
}

TEST_CASE("sigmoid and relu activations with gradients") {
    Sigmoid<double> sig;
    Tensor<double> zero({1, 1});
    zero.data = {0.0};
    CHECK(sig.forward(zero).data[0] == doctest::Approx(0.5));

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed + 400);
        Tensor<double> x({3, 4});
        fill_uniform(x, rng, -2.0, 2.0);
        LinearLoss loss(12, rng);

        Sigmoid<double> s;
        auto run_s = [&] { return loss.value(s.forward(x)); };
        run_s();
        CHECK(check_tensor(x, s.backward(loss.grad({3, 4})), run_s, kH) < kTol);

        Relu<double> r;
        auto run_r = [&] { return loss.value(r.forward(x)); };
        run_r();
        CHECK(check_tensor(x, r.backward(loss.grad({3, 4})), run_r, kH) < kTol);
    }
}

TEST_CASE("inverted dropout keeps the expected value and masks gradients") {
    std::mt19937_64 rng(9);
    Dropout<double> drop(0.5);
    Tensor<double> x({1, 100000});
    for (auto& v : x.data) v = 1.0;
    const Tensor<double> y = drop.forward(x, true, rng);
    double mean = 0.0;
    std::size_t kept = 0;
    for (double v : y.data) {
        mean += v;
        if (v != 0.0) {
            ++kept;
            CHECK(v == doctest::Approx(2.0));  // 1 / keep-probability
        }
    }
    mean /= static_cast<double>(y.count());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    CHECK(static_cast<double>(kept) / static_cast<double>(y.count()) ==
          doctest::Approx(0.5).epsilon(0.02));

    // Backward uses the identical mask.
    Tensor<double> dy({1, 100000});
    for (auto& v : dy.data) v = 1.0;
    const Tensor<double> dx = drop.backward(dy);
    for (std::size_t i = 0; i < dx.count(); ++i) CHECK(dx.data[i] == y.data[i]);

    // Inference is the identity.
    const Tensor<double> y_eval = drop.forward(x, false, rng);
    CHECK(y_eval.data == x.data);
}

TEST_CASE("softmax rows are valid distributions") {
    Tensor<double> logits({2, 3});
    logits.data = {1.0, 2.0, 3.0, 1000.0, 1000.0, 1000.0};
    const Tensor<double> p = softmax_rows(logits);
    for (std::size_t b = 0; b < 2; ++b) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = p.data[b * 3 + c];
            CHECK(v > 0.0);
            CHECK(v < 1.0 + 1e-12);
            CHECK(std::isfinite(v));
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0));
    }
    CHECK(p.data[3] == doctest::Approx(1.0 / 3.0));  // large ties stay stable
}
