#pragma once

// Minimal tensor and layer library with hand-derived backward passes.
// Templated on the scalar type: float for training, double for the
// finite-difference gradient-check suite.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <vector>

#include "gcnn/errors.hpp"

namespace gcnn::nn {

using Rng = std::mt19937_64;

template <typename Real>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<Real> data;

    Tensor() = default;
    explicit Tensor(std::initializer_list<std::size_t> dims) { reset(dims); }

    void reset(std::initializer_list<std::size_t> dims) {
        shape.assign(dims);
        data.assign(count(), Real(0));
    }
    void reset(const std::vector<std::size_t>& dims) {
        shape = dims;
        data.assign(count(), Real(0));
    }
    std::size_t count() const {
        return std::accumulate(shape.begin(), shape.end(), std::size_t(1),
                               std::multiplies<std::size_t>());
    }
    std::size_t dim(std::size_t i) const { return shape[i]; }
    void zero() { std::fill(data.begin(), data.end(), Real(0)); }
    Real* ptr() { return data.data(); }
    const Real* ptr() const { return data.data(); }
};

template <typename Real>
struct ParamRef {
    Tensor<Real>* value;
    Tensor<Real>* grad;
};

template <typename Real>
Real glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return static_cast<Real>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

template <typename Real>
void glorot_fill(Tensor<Real>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : t.data) v = static_cast<Real>(dist(rng));
}

// ---------------------------------------------------------------------------
// Conv1d: same-length zero-padded convolution, taps {current, previous N-1}.
//   y[b,k,t] = bias[k] + sum_c sum_n w[k,c,n] x[b,c,t-n]
// ---------------------------------------------------------------------------
template <typename Real>
class Conv1d {
public:
    Conv1d() = default;
    Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t width)
        : in_ch_(in_ch), out_ch_(out_ch), width_(width) {
        weight.reset({out_ch, in_ch, width});
        bias.reset({out_ch});
        dweight.reset({out_ch, in_ch, width});
        dbias.reset({out_ch});
    }

    void init(Rng& rng) {
        glorot_fill(weight, in_ch_ * width_, out_ch_ * width_, rng);
        bias.zero();
    }

    /// X: {B, C, T} -> {B, K, T}
    Tensor<Real> forward(const Tensor<Real>& x) {
        if (x.shape.size() != 3 || x.dim(1) != in_ch_)
            throw ShapeMismatchError("conv1d input shape");
        x_cache_ = x;
        const std::size_t B = x.dim(0), C = in_ch_, T = x.dim(2), K = out_ch_, N = width_;
        Tensor<Real> y;
        y.reset({B, K, T});
        for (std::size_t b = 0; b < B; ++b) {
            const Real* xb = x.ptr() + b * C * T;
            Real* yb = y.ptr() + b * K * T;
            for (std::size_t k = 0; k < K; ++k) {
                Real* yk = yb + k * T;
                const Real bk = bias.data[k];
                for (std::size_t t = 0; t < T; ++t) yk[t] = bk;
                const Real* wk = weight.ptr() + k * C * N;
                for (std::size_t c = 0; c < C; ++c) {
                    const Real* xc = xb + c * T;
                    for (std::size_t n = 0; n < N; ++n) {
                        const Real w = wk[c * N + n];
                        for (std::size_t t = n; t < T; ++t) yk[t] += w * xc[t - n];
                    }
                }
            }
        }
        return y;
    }

    /// dY: {B, K, T} -> dX {B, C, T}; accumulates dweight/dbias.
    Tensor<Real> backward(const Tensor<Real>& dy) {
        const std::size_t B = x_cache_.dim(0), C = in_ch_, T = x_cache_.dim(2), K = out_ch_,
                          N = width_;
        if (dy.dim(0) != B || dy.dim(1) != K || dy.dim(2) != T)
            throw ShapeMismatchError("conv1d upstream gradient shape");
        Tensor<Real> dx;
        dx.reset({B, C, T});
        for (std::size_t b = 0; b < B; ++b) {
            const Real* xb = x_cache_.ptr() + b * C * T;
            const Real* dyb = dy.ptr() + b * K * T;
            Real* dxb = dx.ptr() + b * C * T;
            for (std::size_t k = 0; k < K; ++k) {
                const Real* dyk = dyb + k * T;
                Real acc = Real(0);
                for (std::size_t t = 0; t < T; ++t) acc += dyk[t];
                dbias.data[k] += acc;
                const Real* wk = weight.ptr() + k * C * N;
                Real* dwk = dweight.ptr() + k * C * N;
                for (std::size_t c = 0; c < C; ++c) {
                    const Real* xc = xb + c * T;
                    Real* dxc = dxb + c * T;
                    for (std::size_t n = 0; n < N; ++n) {
                        const Real w = wk[c * N + n];
                        Real wacc = Real(0);
                        for (std::size_t t = n; t < T; ++t) {
                            wacc += dyk[t] * xc[t - n];
                            dxc[t - n] += w * dyk[t];
                        }
                        dwk[c * N + n] += wacc;
                    }
                }
            }
        }
        return dx;
    }

    void zero_grads() {
        dweight.zero();
        dbias.zero();
    }
    std::vector<ParamRef<Real>> params() {
        return {{&weight, &dweight}, {&bias, &dbias}};
    }

    std::size_t in_channels() const { return in_ch_; }
    std::size_t out_channels() const { return out_ch_; }
    std::size_t width() const { return width_; }

    Tensor<Real> weight;  // {K, C, N}
    Tensor<Real> bias;    // {K}
    Tensor<Real> dweight, dbias;

private:
    std::size_t in_ch_ = 0, out_ch_ = 0, width_ = 0;
    Tensor<Real> x_cache_;
};

// ---------------------------------------------------------------------------
// BatchNorm over the batch and time axes, per channel. Input {B, C, T}
// (dense outputs use T = 1). Running statistics are stored as raw EMAs
// and bias-corrected at inference.
// ---------------------------------------------------------------------------
template <typename Real>
class BatchNorm {
public:
    BatchNorm() = default;
    explicit BatchNorm(std::size_t channels, Real momentum = Real(0.99),
                       Real epsilon = Real(1e-5))
        : ch_(channels), momentum_(momentum), epsilon_(epsilon) {
        gamma.reset({channels});
        beta.reset({channels});
        dgamma.reset({channels});
        dbeta.reset({channels});
        ema_mean.reset({channels});
        ema_var.reset({channels});
        for (auto& g : gamma.data) g = Real(1);
    }

    Tensor<Real> forward(const Tensor<Real>& x, bool train) {
        if (x.shape.size() != 3 || x.dim(1) != ch_)
            throw ShapeMismatchError("batchnorm input shape");
        const std::size_t B = x.dim(0), C = ch_, T = x.dim(2);
        Tensor<Real> y;
        y.reset(x.shape);
        if (train) {
            if (B * T < 2) throw ShapeMismatchError("batchnorm train needs B*T >= 2");
            xhat_.reset(x.shape);
            invstd_.reset({C});
            const Real n = static_cast<Real>(B * T);
            for (std::size_t c = 0; c < C; ++c) {
                Real mean = Real(0);
                for (std::size_t b = 0; b < B; ++b) {
                    const Real* xc = x.ptr() + (b * C + c) * T;
                    for (std::size_t t = 0; t < T; ++t) mean += xc[t];
                }
                mean /= n;
                Real var = Real(0);
                for (std::size_t b = 0; b < B; ++b) {
                    const Real* xc = x.ptr() + (b * C + c) * T;
                    for (std::size_t t = 0; t < T; ++t) {
                        const Real d = xc[t] - mean;
                        var += d * d;
                    }
                }
                var /= n;
                const Real inv = Real(1) / std::sqrt(var + epsilon_);
                invstd_.data[c] = inv;
                for (std::size_t b = 0; b < B; ++b) {
                    const Real* xc = x.ptr() + (b * C + c) * T;
                    Real* hc = xhat_.ptr() + (b * C + c) * T;
                    Real* yc = y.ptr() + (b * C + c) * T;
                    for (std::size_t t = 0; t < T; ++t) {
                        hc[t] = (xc[t] - mean) * inv;
                        yc[t] = gamma.data[c] * hc[t] + beta.data[c];
                    }
                }
                ema_mean.data[c] = momentum_ * ema_mean.data[c] + (Real(1) - momentum_) * mean;
                ema_var.data[c] = momentum_ * ema_var.data[c] + (Real(1) - momentum_) * var;
            }
            ++steps_;
            has_cache_ = true;
        } else {
            for (std::size_t c = 0; c < C; ++c) {
                Real mean = Real(0), var = Real(1);
                if (steps_ > 0) {
                    const Real corr =
                        Real(1) - static_cast<Real>(std::pow(static_cast<double>(momentum_),
                                                             static_cast<double>(steps_)));
                    mean = ema_mean.data[c] / corr;
                    var = ema_var.data[c] / corr;
                }
                const Real inv = Real(1) / std::sqrt(var + epsilon_);
                for (std::size_t b = 0; b < B; ++b) {
                    const Real* xc = x.ptr() + (b * C + c) * T;
                    Real* yc = y.ptr() + (b * C + c) * T;
                    for (std::size_t t = 0; t < T; ++t)
                        yc[t] = gamma.data[c] * (xc[t] - mean) * inv + beta.data[c];
                }
            }
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) {
        if (!has_cache_) throw Error("batchnorm backward without forward cache");
        const std::size_t B = dy.dim(0), C = ch_, T = dy.dim(2);
        Tensor<Real> dx;
        dx.reset(dy.shape);
        const Real n = static_cast<Real>(B * T);
        for (std::size_t c = 0; c < C; ++c) {
            Real sum_dy = Real(0), sum_dy_h = Real(0);
            for (std::size_t b = 0; b < B; ++b) {
                const Real* dyc = dy.ptr() + (b * C + c) * T;
                const Real* hc = xhat_.ptr() + (b * C + c) * T;
                for (std::size_t t = 0; t < T; ++t) {
                    sum_dy += dyc[t];
                    sum_dy_h += dyc[t] * hc[t];
                }
            }
            dbeta.data[c] += sum_dy;
            dgamma.data[c] += sum_dy_h;
            const Real scale = gamma.data[c] * invstd_.data[c] / n;
            for (std::size_t b = 0; b < B; ++b) {
                const Real* dyc = dy.ptr() + (b * C + c) * T;
                const Real* hc = xhat_.ptr() + (b * C + c) * T;
                Real* dxc = dx.ptr() + (b * C + c) * T;
                for (std::size_t t = 0; t < T; ++t)
                    dxc[t] = scale * (n * dyc[t] - sum_dy - hc[t] * sum_dy_h);
            }
        }
        return dx;
    }

    void zero_grads() {
        dgamma.zero();
        dbeta.zero();
    }
    std::vector<ParamRef<Real>> params() {
        return {{&gamma, &dgamma}, {&beta, &dbeta}};
    }

    std::size_t channels() const { return ch_; }
    std::uint64_t steps() const { return steps_; }
    void set_steps(std::uint64_t s) { steps_ = s; }
    Real momentum() const { return momentum_; }

    Tensor<Real> gamma, beta, dgamma, dbeta;
    Tensor<Real> ema_mean, ema_var;

private:
    std::size_t ch_ = 0;
    Real momentum_ = Real(0.99), epsilon_ = Real(1e-5);
    std::uint64_t steps_ = 0;
    Tensor<Real> xhat_, invstd_;
    bool has_cache_ = false;
};

// ---------------------------------------------------------------------------
// Max-pooling, window 2, stride 2, ceil mode: {B, C, M} -> {B, C, ceil(M/2)}.
// ---------------------------------------------------------------------------
template <typename Real>
class MaxPoolHalve {
public:
    Tensor<Real> forward(const Tensor<Real>& x) {
        const std::size_t B = x.dim(0), C = x.dim(1), M = x.dim(2);
        const std::size_t Mo = (M + 1) / 2;
        Tensor<Real> y;
        y.reset({B, C, Mo});
        arg_.assign(B * C * Mo, 0);
        in_len_ = M;
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t c = 0; c < C; ++c) {
                const Real* xc = x.ptr() + (b * C + c) * M;
                Real* yc = y.ptr() + (b * C + c) * Mo;
                std::size_t* ac = arg_.data() + (b * C + c) * Mo;
                for (std::size_t o = 0; o < Mo; ++o) {
                    const std::size_t i0 = 2 * o;
                    const std::size_t i1 = std::min(i0 + 1, M - 1);
                    if (xc[i1] > xc[i0]) {
                        yc[o] = xc[i1];
                        ac[o] = i1;
                    } else {
                        yc[o] = xc[i0];
                        ac[o] = i0;
                    }
                }
            }
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) {
        const std::size_t B = dy.dim(0), C = dy.dim(1), Mo = dy.dim(2);
        Tensor<Real> dx;
        dx.reset({B, C, in_len_});
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t c = 0; c < C; ++c) {
                const Real* dyc = dy.ptr() + (b * C + c) * Mo;
                Real* dxc = dx.ptr() + (b * C + c) * in_len_;
                const std::size_t* ac = arg_.data() + (b * C + c) * Mo;
                for (std::size_t o = 0; o < Mo; ++o) dxc[ac[o]] += dyc[o];
            }
        }
        return dx;
    }

private:
    std::vector<std::size_t> arg_;
    std::size_t in_len_ = 0;
};

// ---------------------------------------------------------------------------
// Dense: {B, O} -> {B, H}, y = W x + b. Activation handled by the caller.
// ---------------------------------------------------------------------------
template <typename Real>
class Dense {
public:
    Dense() = default;
    Dense(std::size_t in, std::size_t out) : in_(in), out_(out) {
        weight.reset({out, in});
        bias.reset({out});
        dweight.reset({out, in});
        dbias.reset({out});
    }

    void init(Rng& rng) {
        glorot_fill(weight, in_, out_, rng);
        bias.zero();
    }

    Tensor<Real> forward(const Tensor<Real>& x) {
        if (x.shape.size() != 2 || x.dim(1) != in_) throw ShapeMismatchError("dense input shape");
        x_cache_ = x;
        const std::size_t B = x.dim(0);
        Tensor<Real> y;
        y.reset({B, out_});
        for (std::size_t b = 0; b < B; ++b) {
            const Real* xb = x.ptr() + b * in_;
            Real* yb = y.ptr() + b * out_;
            for (std::size_t h = 0; h < out_; ++h) {
                const Real* wh = weight.ptr() + h * in_;
                Real acc = bias.data[h];
                for (std::size_t o = 0; o < in_; ++o) acc += wh[o] * xb[o];
                yb[h] = acc;
            }
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) {
        const std::size_t B = x_cache_.dim(0);
        if (dy.dim(0) != B || dy.dim(1) != out_)
            throw ShapeMismatchError("dense upstream gradient shape");
        Tensor<Real> dx;
        dx.reset({B, in_});
        for (std::size_t b = 0; b < B; ++b) {
            const Real* xb = x_cache_.ptr() + b * in_;
            const Real* dyb = dy.ptr() + b * out_;
            Real* dxb = dx.ptr() + b * in_;
            for (std::size_t h = 0; h < out_; ++h) {
                const Real g = dyb[h];
                dbias.data[h] += g;
                Real* dwh = dweight.ptr() + h * in_;
                const Real* wh = weight.ptr() + h * in_;
                for (std::size_t o = 0; o < in_; ++o) {
                    dwh[o] += g * xb[o];
                    dxb[o] += g * wh[o];
                }
            }
        }
        return dx;
    }

    void zero_grads() {
        dweight.zero();
        dbias.zero();
    }
    std::vector<ParamRef<Real>> params() {
        return {{&weight, &dweight}, {&bias, &dbias}};
    }

    std::size_t in_features() const { return in_; }
    std::size_t out_features() const { return out_; }

    Tensor<Real> weight, bias, dweight, dbias;

private:
    std::size_t in_ = 0, out_ = 0;
    Tensor<Real> x_cache_;
};

// ---------------------------------------------------------------------------
// Inverted dropout.
// ---------------------------------------------------------------------------
template <typename Real>
class Dropout {
public:
    explicit Dropout(Real p = Real(0.5)) : p_(p) {}

    Tensor<Real> forward(const Tensor<Real>& x, bool train, Rng& rng) {
        if (!train || p_ <= Real(0)) {
            mask_.clear();
            return x;
        }
        const Real keep = Real(1) - p_;
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        Tensor<Real> y = x;
        mask_.assign(x.count(), Real(0));
        for (std::size_t i = 0; i < x.count(); ++i) {
            if (dist(rng) >= static_cast<double>(p_)) {
                mask_[i] = Real(1) / keep;
                y.data[i] = x.data[i] * mask_[i];
            } else {
                y.data[i] = Real(0);
            }
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) {
        if (mask_.empty()) return dy;
        Tensor<Real> dx = dy;
        for (std::size_t i = 0; i < dx.count(); ++i) dx.data[i] *= mask_[i];
        return dx;
    }

    Real p() const { return p_; }

private:
    Real p_;
    std::vector<Real> mask_;
};

// ---------------------------------------------------------------------------
// Elementwise activations with caches.
// ---------------------------------------------------------------------------
template <typename Real>
class Sigmoid {
public:
    Tensor<Real> forward(const Tensor<Real>& x) {
        Tensor<Real> y = x;
        for (auto& v : y.data) v = Real(1) / (Real(1) + std::exp(-v));
        y_cache_ = y;
        return y;
    }
    Tensor<Real> backward(const Tensor<Real>& dy) {
        Tensor<Real> dx = dy;
        for (std::size_t i = 0; i < dx.count(); ++i)
            dx.data[i] *= y_cache_.data[i] * (Real(1) - y_cache_.data[i]);
        return dx;
    }
    const Tensor<Real>& output() const { return y_cache_; }

private:
    Tensor<Real> y_cache_;
};

template <typename Real>
class Relu {
public:
    Tensor<Real> forward(const Tensor<Real>& x) {
        x_cache_ = x;
        Tensor<Real> y = x;
        for (auto& v : y.data) v = v > Real(0) ? v : Real(0);
        return y;
    }
    Tensor<Real> backward(const Tensor<Real>& dy) {
        Tensor<Real> dx = dy;
        for (std::size_t i = 0; i < dx.count(); ++i)
            if (x_cache_.data[i] <= Real(0)) dx.data[i] = Real(0);
        return dx;
    }

private:
    Tensor<Real> x_cache_;
};

/// Row-wise softmax on {B, C}.
template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& logits) {
    const std::size_t B = logits.dim(0), C = logits.dim(1);
    Tensor<Real> p;
    p.reset(logits.shape);
    for (std::size_t b = 0; b < B; ++b) {
        const Real* lb = logits.ptr() + b * C;
        Real* pb = p.ptr() + b * C;
        Real mx = lb[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, lb[c]);
        Real sum = Real(0);
        for (std::size_t c = 0; c < C; ++c) {
            pb[c] = std::exp(lb[c] - mx);
            sum += pb[c];
        }
        for (std::size_t c = 0; c < C; ++c) pb[c] /= sum;
    }
    return p;
}

}  // namespace gcnn::nn
