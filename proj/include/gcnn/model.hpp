#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gcnn/features.hpp"
#include "gcnn/nn.hpp"

namespace gcnn {

struct ModelConfig {
    int num_blocks = 8;       // {6, 8, 10} in the reference sweep
    int kernels = 64;         // K
    int kernel_width = 2;     // N
    int dense_units = 256;
    float dropout_p = 0.5f;
    int classes = 2;          // 2 -> single sigmoid unit, 3 -> softmax
    int input_rows = 76;      // F
    int input_frames = 397;   // T

    int head_units() const { return classes == 2 ? 1 : classes; }
};

/// Time lengths through the ceil-mode pooling stack, starting at T.
std::vector<int> pooled_lengths(int frames, int num_blocks);

/// Flattened size after the last block: K * final_length.
int flatten_size(const ModelConfig& cfg);

namespace nn {

template <typename Real>
struct GatedBlock {
    Conv1d<Real> linear_conv, gate_conv;
    BatchNorm<Real> bn_linear, bn_gate;
    Sigmoid<Real> gate_act;
    MaxPoolHalve<Real> pool;
    Tensor<Real> lin_cache_, gate_cache_;  // BN outputs, for the product rule

    GatedBlock() = default;
    GatedBlock(std::size_t in_ch, std::size_t out_ch, std::size_t width)
        : linear_conv(in_ch, out_ch, width),
          gate_conv(in_ch, out_ch, width),
          bn_linear(out_ch),
          bn_gate(out_ch) {}

    void init(Rng& rng) {
        linear_conv.init(rng);
        gate_conv.init(rng);
    }

    Tensor<Real> forward(const Tensor<Real>& x, bool train) {
        lin_cache_ = bn_linear.forward(linear_conv.forward(x), train);
        gate_cache_ = gate_act.forward(bn_gate.forward(gate_conv.forward(x), train));
        Tensor<Real> prod = lin_cache_;
        for (std::size_t i = 0; i < prod.count(); ++i) prod.data[i] *= gate_cache_.data[i];
        return pool.forward(prod);
    }

    Tensor<Real> backward(const Tensor<Real>& dy) {
        Tensor<Real> dprod = pool.backward(dy);
        Tensor<Real> dlin = dprod, dgate = dprod;
        for (std::size_t i = 0; i < dprod.count(); ++i) {
            dlin.data[i] = dprod.data[i] * gate_cache_.data[i];
            dgate.data[i] = dprod.data[i] * lin_cache_.data[i];
        }
        Tensor<Real> dx = linear_conv.backward(bn_linear.backward(dlin));
        Tensor<Real> dx2 = gate_conv.backward(bn_gate.backward(gate_act.backward(dgate)));
        for (std::size_t i = 0; i < dx.count(); ++i) dx.data[i] += dx2.data[i];
        return dx;
    }

    void zero_grads() {
        linear_conv.zero_grads();
        gate_conv.zero_grads();
        bn_linear.zero_grads();
        bn_gate.zero_grads();
    }

    std::vector<ParamRef<Real>> params() {
        std::vector<ParamRef<Real>> out;
        for (auto* layer : {&linear_conv, &gate_conv})
            for (auto p : layer->params()) out.push_back(p);
        for (auto* bn : {&bn_linear, &bn_gate})
            for (auto p : bn->params()) out.push_back(p);
        return out;
    }
};

template <typename Real>
class Model {
public:
    Model() = default;
    explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
        std::size_t in_ch = static_cast<std::size_t>(cfg.input_rows);
        for (int i = 0; i < cfg.num_blocks; ++i) {
            blocks_.emplace_back(in_ch, static_cast<std::size_t>(cfg.kernels),
                                 static_cast<std::size_t>(cfg.kernel_width));
            in_ch = static_cast<std::size_t>(cfg.kernels);
        }
        const std::size_t flat = static_cast<std::size_t>(flatten_size(cfg));
        fc_ = Dense<Real>(flat, static_cast<std::size_t>(cfg.dense_units));
        bn_fc_ = BatchNorm<Real>(static_cast<std::size_t>(cfg.dense_units));
        drop_ = Dropout<Real>(static_cast<Real>(cfg.dropout_p));
        head_ = Dense<Real>(static_cast<std::size_t>(cfg.dense_units),
                            static_cast<std::size_t>(cfg.head_units()));
    }

    void init(Rng& rng) {
        for (auto& b : blocks_) b.init(rng);
        fc_.init(rng);
        head_.init(rng);
    }

    /// X: {B, F, T} -> probabilities {B, 1} (binary) or {B, 3} (softmax).
    Tensor<Real> forward(const Tensor<Real>& x, bool train, Rng& rng) {
        if (x.shape.size() != 3 || x.dim(1) != static_cast<std::size_t>(cfg_.input_rows) ||
            x.dim(2) != static_cast<std::size_t>(cfg_.input_frames))
            throw ShapeMismatchError("model input must be B x F x T");
        Tensor<Real> h = x;
        for (auto& b : blocks_) h = b.forward(h, train);
        // Flatten {B, K, M} -> {B, K*M}, channel-major.
        flat_shape_ = h.shape;
        Tensor<Real> z;
        z.shape = {h.dim(0), h.dim(1) * h.dim(2)};
        z.data = std::move(h.data);
        Tensor<Real> d = relu_.forward(bn2_to3(bn_fc_, fc_.forward(z), train));
        Tensor<Real> dd = drop_.forward(d, train, rng);
        logits_ = head_.forward(dd);
        if (cfg_.classes == 2) {
            probs_ = head_act_.forward(logits_);
        } else {
            probs_ = softmax_rows(logits_);
        }
        return probs_;
    }

    /// dLogits: gradient of the loss w.r.t. the head pre-activations.
    void backward(const Tensor<Real>& dlogits) {
        Tensor<Real> d = drop_.backward(head_.backward(dlogits));
        Tensor<Real> dz = fc_.backward(dbn2_to3(bn_fc_, relu_.backward(d)));
        Tensor<Real> dh;
        dh.shape = flat_shape_;
        dh.data = std::move(dz.data);
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dh = it->backward(dh);
    }

    const Tensor<Real>& logits() const { return logits_; }
    const ModelConfig& config() const { return cfg_; }

    void zero_grads() {
        for (auto& b : blocks_) b.zero_grads();
        fc_.zero_grads();
        bn_fc_.zero_grads();
        head_.zero_grads();
    }

    std::vector<ParamRef<Real>> params() {
        std::vector<ParamRef<Real>> out;
        for (auto& b : blocks_)
            for (auto p : b.params()) out.push_back(p);
        for (auto p : fc_.params()) out.push_back(p);
        for (auto p : bn_fc_.params()) out.push_back(p);
        for (auto p : head_.params()) out.push_back(p);
        return out;
    }

    std::vector<GatedBlock<Real>>& blocks() { return blocks_; }
    Dense<Real>& fc() { return fc_; }
    BatchNorm<Real>& bn_fc() { return bn_fc_; }
    Dense<Real>& head() { return head_; }

private:
    // BatchNorm expects {B, C, T}; dense outputs are {B, C}.
    static Tensor<Real> bn2_to3(BatchNorm<Real>& bn, const Tensor<Real>& x, bool train) {
        Tensor<Real> x3;
        x3.shape = {x.dim(0), x.dim(1), 1};
        x3.data = x.data;
        Tensor<Real> y3 = bn.forward(x3, train);
        Tensor<Real> y;
        y.shape = {x.dim(0), x.dim(1)};
        y.data = std::move(y3.data);
        return y;
    }
    static Tensor<Real> dbn2_to3(BatchNorm<Real>& bn, const Tensor<Real>& dy) {
        Tensor<Real> dy3;
        dy3.shape = {dy.dim(0), dy.dim(1), 1};
        dy3.data = dy.data;
        Tensor<Real> dx3 = bn.backward(dy3);
        Tensor<Real> dx;
        dx.shape = {dy.dim(0), dy.dim(1)};
        dx.data = std::move(dx3.data);
        return dx;
    }

    ModelConfig cfg_;
    std::vector<GatedBlock<Real>> blocks_;
    Dense<Real> fc_, head_;
    BatchNorm<Real> bn_fc_;
    Dropout<Real> drop_{Real(0.5)};
    Relu<Real> relu_;
    Sigmoid<Real> head_act_;
    Tensor<Real> logits_, probs_;
    std::vector<std::size_t> flat_shape_;
};

}  // namespace nn

using ModelF = nn::Model<float>;

struct Prediction {
    int label = 0;                     // class index; binary: 1 = positive
    std::vector<float> probabilities;  // size = classes
};

/// Inference on a single assembled (and normalized) feature matrix.
Prediction predict_segment(nn::Model<float>& model, const FeatureMatrix& features);

/// Weight file: magic "GCNN", version, config text block, optional row
/// stats, then parameter and running-stat tensors in declaration order.
void save_model(const std::string& path, nn::Model<float>& model, const RowStats* stats);

struct LoadedModel {
    nn::Model<float> model;
    std::optional<RowStats> stats;
};
LoadedModel load_model(const std::string& path);

}  // namespace gcnn
