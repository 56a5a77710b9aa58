#include "gcnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "gcnn/parallel.hpp"

namespace gcnn {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, int a, int b, int c) {
    std::uint64_t s = splitmix64(base);
    s = splitmix64(s ^ static_cast<std::uint64_t>(a + 1));
    s = splitmix64(s ^ (static_cast<std::uint64_t>(b + 1) << 20));
    s = splitmix64(s ^ (static_cast<std::uint64_t>(c + 1) << 40));
    return s;
}

double speaker_f0_offset(const SynthSpec& spec, int class_idx, int speaker_idx) {
    std::mt19937_64 rng(derive_seed(spec.seed, class_idx, speaker_idx, -1));
    std::normal_distribution<double> dist(0.0, spec.classes[static_cast<std::size_t>(class_idx)]
                                                   .second.f0_speaker_std_hz);
    return dist(rng);
}

}  // namespace

void SynthSpec::validate() const {
    if (speakers_per_class < 2) throw ConfigError("need at least 2 speakers per class");
    if (sessions_per_speaker < 1) throw ConfigError("need at least 1 session per speaker");
    if (session_duration_s <= 0.0) throw ConfigError("session duration must be positive");
    if (classes.size() < 2) throw ConfigError("need at least 2 classes");
    for (std::size_t i = 0; i < classes.size(); ++i) {
        for (std::size_t j = i + 1; j < classes.size(); ++j) {
            const ClassProfile& a = classes[i].second;
            const ClassProfile& b = classes[j].second;
            if (a.f0_mean_hz == b.f0_mean_hz && a.jitter == b.jitter &&
                a.rate_sylps == b.rate_sylps)
                throw ConfigError("class profiles must be distinct");
            if (classes[i].first == classes[j].first)
                throw ConfigError("duplicate class label in spec");
        }
    }
}

SynthSpec default_binary_spec(double f0_gap_hz) {
    SynthSpec spec;
    ClassProfile dementia;
    dementia.f0_mean_hz = 120.0;
    dementia.jitter = 0.03;
    dementia.rate_sylps = 2.2;
    dementia.am_depth = 0.45;
    ClassProfile healthy;
    healthy.f0_mean_hz = 120.0 + f0_gap_hz;
    healthy.jitter = 0.005;
    healthy.rate_sylps = 3.5;
    healthy.am_depth = 0.2;
    spec.classes = {{ClassLabel::D, dementia}, {ClassLabel::H, healthy}};
    return spec;
}

SynthSpec default_three_class_spec() {
    SynthSpec spec = default_binary_spec(80.0);
    ClassProfile mci;
    mci.f0_mean_hz = 160.0;
    mci.jitter = 0.015;
    mci.rate_sylps = 2.8;
    mci.am_depth = 0.3;
    spec.classes.insert(spec.classes.begin() + 1, {ClassLabel::M, mci});
    return spec;
}

std::string synth_speaker_id(const SynthSpec& spec, int class_idx, int speaker_idx) {
    std::ostringstream id;
    id << class_name(spec.classes[static_cast<std::size_t>(class_idx)].first) << "_spk";
    id.fill('0');
    id.width(3);
    id << speaker_idx;
    return id.str();
}

std::string synth_session_id(const SynthSpec& spec, int class_idx, int speaker_idx,
                             int session_idx) {
    std::ostringstream id;
    id << synth_speaker_id(spec, class_idx, speaker_idx) << "_s";
    id.fill('0');
    id.width(2);
    id << session_idx;
    return id.str();
}

AudioClip synth_session(const SynthSpec& spec, int class_idx, int speaker_idx,
                        int session_idx) {
    spec.validate();
    if (class_idx < 0 || class_idx >= static_cast<int>(spec.classes.size()))
        throw OutOfRangeError("class index out of range");
    const ClassProfile& prof = spec.classes[static_cast<std::size_t>(class_idx)].second;
    const double f0_base = prof.f0_mean_hz + speaker_f0_offset(spec, class_idx, speaker_idx);

    std::mt19937_64 rng(derive_seed(spec.seed, class_idx, speaker_idx, session_idx));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const int rate = spec.sample_rate;
    const std::size_t total = static_cast<std::size_t>(spec.session_duration_s * rate);
    AudioClip clip;
    clip.sample_rate = rate;
    clip.samples.assign(total, 0.0f);

    const double syll_period = 1.0 / prof.rate_sylps;
    constexpr int kHarmonics = 5;
    constexpr double kRampS = 0.02;

    std::size_t pos = 0;
    while (pos < total) {
        const double syll_dur = std::clamp(0.6 * syll_period + 0.15 * (unif(rng) - 0.5),
                                           0.10, 0.45);
        const double gap = std::max(0.04, syll_period - syll_dur);
        const double f0_syll = f0_base * (1.0 + 0.04 * (unif(rng) - 0.5));
        const double am_freq = 3.0 + 2.0 * unif(rng);
        const double am_phase = 2.0 * M_PI * unif(rng);

        const std::size_t syll_samples =
            std::min(static_cast<std::size_t>(syll_dur * rate), total - pos);
        std::size_t written = 0;
        while (written < syll_samples) {
            // One period at a jittered instantaneous F0; phases close at
            // period boundaries so the waveform stays continuous.
            const double f_inst =
                std::max(40.0, f0_syll * (1.0 + prof.jitter * gauss(rng)));
            const std::size_t period = std::max<std::size_t>(
                8, static_cast<std::size_t>(std::llround(rate / f_inst)));
            for (std::size_t n = 0; n < period && written < syll_samples; ++n, ++written) {
                double v = 0.0;
                for (int h = 1; h <= kHarmonics; ++h)
                    v += (0.5 / h) * std::sin(2.0 * M_PI * h * static_cast<double>(n) /
                                              static_cast<double>(period));
                const double t = static_cast<double>(written) / rate;
                double env = 1.0;
                if (t < kRampS) env = 0.5 - 0.5 * std::cos(M_PI * t / kRampS);
                const double tail = syll_dur - t;
                if (tail < kRampS) env *= 0.5 - 0.5 * std::cos(M_PI * std::max(0.0, tail) / kRampS);
                const double am =
                    1.0 - prof.am_depth * (0.5 + 0.5 * std::sin(2.0 * M_PI * am_freq * t + am_phase));
                clip.samples[pos + written] = static_cast<float>(0.35 * v * env * am);
            }
        }
        pos += syll_samples;
        pos += std::min(static_cast<std::size_t>(gap * rate), total - pos);
    }
    return clip;
}

int synth_mmse(const SynthSpec& spec, int class_idx, int speaker_idx, int session_idx) {
    const ClassLabel label = spec.classes[static_cast<std::size_t>(class_idx)].first;
    int lo = 27, hi = 30;
    if (label == ClassLabel::D) {
        lo = 0;
        hi = 23;
    } else if (label == ClassLabel::M) {
        lo = 24;
        hi = 26;
    }
    std::mt19937_64 rng(derive_seed(spec.seed ^ 0x4d4d5345ULL, class_idx, speaker_idx, session_idx));
    std::uniform_int_distribution<int> dist(lo, hi);
    return dist(rng);
}

std::vector<ManifestRecord> synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
    spec.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    struct Job {
        int class_idx, speaker_idx, session_idx;
    };
    std::vector<Job> jobs;
    for (int c = 0; c < static_cast<int>(spec.classes.size()); ++c)
        for (int s = 0; s < spec.speakers_per_class; ++s)
            for (int e = 0; e < spec.sessions_per_speaker; ++e) jobs.push_back({c, s, e});

    std::vector<ManifestRecord> records(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), [&](int i) {
        const Job& j = jobs[static_cast<std::size_t>(i)];
        const std::string sid = synth_session_id(spec, j.class_idx, j.speaker_idx, j.session_idx);
        const std::string wav_path = (fs::path(out_dir) / (sid + ".wav")).string();
        write_wav(wav_path, synth_session(spec, j.class_idx, j.speaker_idx, j.session_idx));
        ManifestRecord r;
        r.session_id = sid;
        r.speaker_id = synth_speaker_id(spec, j.class_idx, j.speaker_idx);
        r.patient_wav = wav_path;
        r.mmse = synth_mmse(spec, j.class_idx, j.speaker_idx, j.session_idx);
        r.dataset = "synthetic";
        records[static_cast<std::size_t>(i)] = std::move(r);
    });

    save_manifest((fs::path(out_dir) / "manifest.jsonl").string(), records);
    return records;
}

SynthSpec load_synth_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open synth spec: " + path);
    SynthSpec spec = default_binary_spec();
    spec.classes.clear();
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed spec line: " + line);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
        };
        trim(key);
        trim(val);
        kv[key] = val;
    }
    auto get = [&](const std::string& key, double fallback) {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : std::stod(it->second);
    };
    spec.speakers_per_class = static_cast<int>(get("speakers_per_class", 20));
    spec.sessions_per_speaker = static_cast<int>(get("sessions_per_speaker", 2));
    spec.session_duration_s = get("session_duration_s", 60.0);
    spec.sample_rate = static_cast<int>(get("sample_rate", 16000));
    spec.seed = static_cast<std::uint64_t>(get("seed", 42));

    std::string class_list = kv.count("classes") ? kv["classes"] : "D,H";
    std::istringstream cs(class_list);
    std::string name;
    while (std::getline(cs, name, ',')) {
        const ClassLabel label = parse_class_label(name);
        ClassProfile prof;
        const std::string prefix = "class." + name + ".";
        prof.f0_mean_hz = get(prefix + "f0_mean", label == ClassLabel::D   ? 120.0
                                                  : label == ClassLabel::M ? 160.0
                                                                           : 180.0);
        prof.f0_speaker_std_hz = get(prefix + "f0_speaker_std", 8.0);
        prof.jitter = get(prefix + "jitter", label == ClassLabel::D   ? 0.03
                                             : label == ClassLabel::M ? 0.015
                                                                      : 0.005);
        prof.rate_sylps = get(prefix + "rate", label == ClassLabel::D   ? 2.2
                                               : label == ClassLabel::M ? 2.8
                                                                        : 3.5);
        prof.am_depth = get(prefix + "am_depth", 0.3);
        spec.classes.emplace_back(label, prof);
    }
    spec.validate();
    return spec;
}

}  // namespace gcnn
