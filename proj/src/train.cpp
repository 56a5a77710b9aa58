#include "gcnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gcnn {

std::pair<double, double> bce_loss(double p, int y) {
    const double pc = std::clamp(p, 1e-7, 1.0 - 1e-7);
    const double loss = -(y == 1 ? std::log(pc) : std::log(1.0 - pc));
    return {loss, p - static_cast<double>(y)};
}

std::pair<double, std::vector<double>> cce_loss(const std::vector<double>& probs, int y) {
    if (y < 0 || y >= static_cast<int>(probs.size()))
        throw OutOfRangeError("class index out of range");
    const double pc = std::clamp(probs[static_cast<std::size_t>(y)], 1e-7, 1.0);
    std::vector<double> grad = probs;
    grad[static_cast<std::size_t>(y)] -= 1.0;
    return {-std::log(pc), grad};
}

nn::Model<float> train_fold(const std::vector<TrainSegment>& segments, const ModelConfig& mcfg,
                            const TrainConfig& tcfg, const RowStats& stats,
                            std::vector<EpochLogEntry>* log) {
    if (segments.empty()) throw EmptyInputError("empty training set");
    for (const auto& s : segments)
        if (s.label < 0 || s.label >= mcfg.classes)
            throw OutOfRangeError("label out of range for class count");

    nn::Rng rng(tcfg.seed);
    nn::Model<float> model(mcfg);
    model.init(rng);
    nn::Adam<float> opt(model.params(), tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.epsilon);

    const int F = mcfg.input_rows, T = mcfg.input_frames;
    const int head = mcfg.head_units();
    std::vector<std::size_t> order(segments.size());
    std::iota(order.begin(), order.end(), 0);

    auto weight_of = [&](int y) -> float {
        if (tcfg.class_weights.empty()) return 1.0f;
        return tcfg.class_weights[static_cast<std::size_t>(y)];
    };

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        int batch_index = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(tcfg.batch_size)) {
            const std::size_t bsz =
                std::min(static_cast<std::size_t>(tcfg.batch_size), order.size() - pos);

            nn::Tensor<float> x;
            x.reset({bsz, static_cast<std::size_t>(F), static_cast<std::size_t>(T)});
            std::vector<int> labels(bsz);
            for (std::size_t b = 0; b < bsz; ++b) {
                const TrainSegment& seg = segments[order[pos + b]];
                labels[b] = seg.label;
                const FeatureMatrix m = assemble_feature_matrix(*seg.features, T, &stats);
                std::copy(m.v.begin(), m.v.end(),
                          x.data.begin() + static_cast<std::ptrdiff_t>(b * static_cast<std::size_t>(F) * static_cast<std::size_t>(T)));
            }

            const nn::Tensor<float> probs = model.forward(x, /*train=*/true, rng);

            nn::Tensor<float> dlogits;
            dlogits.reset({bsz, static_cast<std::size_t>(head)});
            double loss_sum = 0.0;
            int correct = 0;
            for (std::size_t b = 0; b < bsz; ++b) {
                const float w = weight_of(labels[b]);
                if (mcfg.classes == 2) {
                    const double p = probs.data[b];
                    const auto [loss, g] = bce_loss(p, labels[b]);
                    loss_sum += w * loss;
                    dlogits.data[b] = static_cast<float>(w * g / static_cast<double>(bsz));
                    if ((p >= 0.5) == (labels[b] == 1)) ++correct;
                } else {
                    std::vector<double> pv(static_cast<std::size_t>(head));
                    for (int c = 0; c < head; ++c)
                        pv[static_cast<std::size_t>(c)] =
                            probs.data[b * static_cast<std::size_t>(head) + static_cast<std::size_t>(c)];
                    const auto [loss, g] = cce_loss(pv, labels[b]);
                    loss_sum += w * loss;
                    for (int c = 0; c < head; ++c)
                        dlogits.data[b * static_cast<std::size_t>(head) + static_cast<std::size_t>(c)] =
                            static_cast<float>(w * g[static_cast<std::size_t>(c)] /
                                               static_cast<double>(bsz));
                    const int arg = static_cast<int>(
                        std::max_element(pv.begin(), pv.end()) - pv.begin());
                    if (arg == labels[b]) ++correct;
                }
            }

            model.zero_grads();
            model.backward(dlogits);
            opt.step();

            if (log) {
                log->push_back({epoch, batch_index, loss_sum / static_cast<double>(bsz),
                                static_cast<double>(correct) / static_cast<double>(bsz)});
            }
            ++batch_index;
        }
    }
    return model;
}

}  // namespace gcnn
