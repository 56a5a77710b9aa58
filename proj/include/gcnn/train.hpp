#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "gcnn/model.hpp"
#include "gcnn/nn.hpp"

namespace gcnn {

struct TrainConfig {
    int batch_size = 32;
    int epochs = 20;
    std::uint64_t seed = 0;
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
    std::vector<float> class_weights;  // empty = unweighted
};

/// loss = -[y ln p + (1-y) ln(1-p)], p clamped to [1e-7, 1-1e-7].
/// Second element is dLoss/dLogit = p - y (pre-clamp p).
std::pair<double, double> bce_loss(double p, int y);

/// loss = -ln probs[y]; gradient w.r.t. logits is probs - onehot(y).
std::pair<double, std::vector<double>> cce_loss(const std::vector<double>& probs, int y);

namespace nn {

template <typename Real>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<ParamRef<Real>> params, Real lr = Real(1e-3), Real beta1 = Real(0.9),
         Real beta2 = Real(0.999), Real epsilon = Real(1e-8))
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].reset(params_[i].value->shape);
            v_[i].reset(params_[i].value->shape);
        }
    }

    void step() {
        ++t_;
        const Real bc1 = Real(1) - static_cast<Real>(std::pow(static_cast<double>(beta1_),
                                                              static_cast<double>(t_)));
        const Real bc2 = Real(1) - static_cast<Real>(std::pow(static_cast<double>(beta2_),
                                                              static_cast<double>(t_)));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Real* p = params_[i].value->ptr();
            const Real* g = params_[i].grad->ptr();
            Real* m = m_[i].ptr();
            Real* v = v_[i].ptr();
            const std::size_t n = params_[i].value->count();
            for (std::size_t j = 0; j < n; ++j) {
                m[j] = beta1_ * m[j] + (Real(1) - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (Real(1) - beta2_) * g[j] * g[j];
                const Real mhat = m[j] / bc1;
                const Real vhat = v[j] / bc2;
                p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    std::uint64_t t() const { return t_; }

private:
    std::vector<ParamRef<Real>> params_;
    std::vector<Tensor<Real>> m_, v_;
    Real lr_ = Real(1e-3), beta1_ = Real(0.9), beta2_ = Real(0.999), eps_ = Real(1e-8);
    std::uint64_t t_ = 0;
};

}  // namespace nn

struct TrainSegment {
    const FeatureMatrix* features = nullptr;  // raw (unpadded) 76 x T_raw
    int label = 0;
};

struct EpochLogEntry {
    int epoch = 0;
    int batch = 0;
    double loss = 0.0;
    double seg_accuracy = 0.0;
};

/// Trains a fresh model on the given segments. Raw feature matrices are
/// assembled (pad/truncate to T) and z-normalized with `stats` when
/// building each mini-batch. Deterministic given (data, configs, seed).
nn::Model<float> train_fold(const std::vector<TrainSegment>& segments, const ModelConfig& mcfg,
                            const TrainConfig& tcfg, const RowStats& stats,
                            std::vector<EpochLogEntry>* log = nullptr);

}  // namespace gcnn
