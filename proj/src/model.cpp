#include "gcnn/model.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gcnn {

std::vector<int> pooled_lengths(int frames, int num_blocks) {
    std::vector<int> lengths;
    lengths.reserve(static_cast<std::size_t>(num_blocks) + 1);
    int m = frames;
    lengths.push_back(m);
    for (int i = 0; i < num_blocks; ++i) {
        m = (m + 1) / 2;  // ceil mode; never drops below 1
        lengths.push_back(m);
    }
    return lengths;
}

int flatten_size(const ModelConfig& cfg) {
    return cfg.kernels * pooled_lengths(cfg.input_frames, cfg.num_blocks).back();
}

Prediction predict_segment(nn::Model<float>& model, const FeatureMatrix& features) {
    const ModelConfig& cfg = model.config();
    if (features.rows != cfg.input_rows || features.cols != cfg.input_frames)
        throw ShapeMismatchError("feature matrix does not match model input");
    nn::Tensor<float> x;
    x.shape = {1, static_cast<std::size_t>(cfg.input_rows),
               static_cast<std::size_t>(cfg.input_frames)};
    x.data = features.v;
    nn::Rng rng(0);  // unused in inference mode
    const nn::Tensor<float> p = model.forward(x, /*train=*/false, rng);
    Prediction out;
    if (cfg.classes == 2) {
        const float pp = p.data[0];
        out.probabilities = {1.0f - pp, pp};
        out.label = pp >= 0.5f ? 1 : 0;  // ties go to the positive class
    } else {
        out.probabilities.assign(p.data.begin(), p.data.end());
        int best = 0;
        for (int c = 1; c < cfg.classes; ++c)
            if (out.probabilities[static_cast<std::size_t>(c)] >
                out.probabilities[static_cast<std::size_t>(best)])
                best = c;
        out.label = best;
    }
    return out;
}

namespace {

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<char*>(&v), 8); }
uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_tensor(std::ostream& out, const nn::Tensor<float>& t) {
    write_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) write_u32(out, static_cast<uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

void read_tensor(std::istream& in, nn::Tensor<float>& t) {
    const uint32_t ndim = read_u32(in);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = read_u32(in);
    if (shape != t.shape) throw UnsupportedFormatError("weight tensor shape mismatch");
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw UnsupportedFormatError("truncated weight file");
}

template <class F, class G>
void visit_state(nn::Model<float>& model, F&& tensor_fn, G&& steps_fn) {
    for (auto& b : model.blocks()) {
        tensor_fn(b.linear_conv.weight);
        tensor_fn(b.linear_conv.bias);
        tensor_fn(b.gate_conv.weight);
        tensor_fn(b.gate_conv.bias);
        for (auto* bn : {&b.bn_linear, &b.bn_gate}) {
            tensor_fn(bn->gamma);
            tensor_fn(bn->beta);
            tensor_fn(bn->ema_mean);
            tensor_fn(bn->ema_var);
            steps_fn(*bn);
        }
    }
    tensor_fn(model.fc().weight);
    tensor_fn(model.fc().bias);
    tensor_fn(model.bn_fc().gamma);
    tensor_fn(model.bn_fc().beta);
    tensor_fn(model.bn_fc().ema_mean);
    tensor_fn(model.bn_fc().ema_var);
    steps_fn(model.bn_fc());
    tensor_fn(model.head().weight);
    tensor_fn(model.head().bias);
}

}  // namespace

void save_model(const std::string& path, nn::Model<float>& model, const RowStats* stats) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file: " + path);
    out.write("GCNN", 4);
    write_u32(out, 1);  // version

    const ModelConfig& c = model.config();
    std::ostringstream cfg;
    cfg << "num_blocks=" << c.num_blocks << "\nkernels=" << c.kernels
        << "\nkernel_width=" << c.kernel_width << "\ndense_units=" << c.dense_units
        << "\ndropout_p=" << c.dropout_p << "\nclasses=" << c.classes
        << "\ninput_rows=" << c.input_rows << "\ninput_frames=" << c.input_frames << "\n";
    const std::string cfg_text = cfg.str();
    write_u32(out, static_cast<uint32_t>(cfg_text.size()));
    out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

    write_u32(out, stats ? 1u : 0u);
    if (stats) {
        nn::Tensor<float> mean, sd;
        mean.shape = {stats->mean.size()};
        mean.data = stats->mean;
        sd.shape = {stats->stddev.size()};
        sd.data = stats->stddev;
        write_tensor(out, mean);
        write_tensor(out, sd);
    }

    visit_state(
        model, [&](nn::Tensor<float>& t) { write_tensor(out, t); },
        [&](nn::BatchNorm<float>& bn) { write_u64(out, bn.steps()); });
    if (!out) throw IoError("short write: " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open model file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GCNN", 4) != 0)
        throw UnsupportedFormatError(path + ": bad model magic");
    if (read_u32(in) != 1) throw UnsupportedFormatError(path + ": bad model version");

    const uint32_t cfg_len = read_u32(in);
    std::string cfg_text(cfg_len, '\0');
    in.read(cfg_text.data(), cfg_len);
    ModelConfig cfg;
    std::istringstream lines(cfg_text);
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "num_blocks") cfg.num_blocks = std::stoi(val);
        else if (key == "kernels") cfg.kernels = std::stoi(val);
        else if (key == "kernel_width") cfg.kernel_width = std::stoi(val);
        else if (key == "dense_units") cfg.dense_units = std::stoi(val);
        else if (key == "dropout_p") cfg.dropout_p = std::stof(val);
        else if (key == "classes") cfg.classes = std::stoi(val);
        else if (key == "input_rows") cfg.input_rows = std::stoi(val);
        else if (key == "input_frames") cfg.input_frames = std::stoi(val);
    }

    LoadedModel lm{nn::Model<float>(cfg), std::nullopt};
    if (read_u32(in) == 1) {
        RowStats st;
        nn::Tensor<float> mean, sd;
        mean.reset({static_cast<std::size_t>(cfg.input_rows)});
        sd.reset({static_cast<std::size_t>(cfg.input_rows)});
        read_tensor(in, mean);
        read_tensor(in, sd);
        st.mean = mean.data;
        st.stddev = sd.data;
        lm.stats = std::move(st);
    }
    visit_state(
        lm.model, [&](nn::Tensor<float>& t) { read_tensor(in, t); },
        [&](nn::BatchNorm<float>& bn) { bn.set_steps(read_u64(in)); });
    return lm;
}

}  // namespace gcnn
