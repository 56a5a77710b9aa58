#include "gcnn/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "gcnn/dsp.hpp"

namespace gcnn {

namespace {

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ostream& out, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open wav file: " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw UnsupportedFormatError(path + ": not a RIFF file");
    read_u32(in);  // riff size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw UnsupportedFormatError(path + ": not a WAVE file");

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    AudioClip clip;

    while (in.read(tag, 4)) {
        uint32_t chunk_size = read_u32(in);
        if (!in) break;
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw UnsupportedFormatError(path + ": data before fmt");
            if (format != 1) throw UnsupportedFormatError(path + ": not PCM");
            if (channels != 1) throw UnsupportedFormatError(path + ": not mono");
            if (bits != 16) throw UnsupportedFormatError(path + ": not 16-bit");
            const uint32_t n = chunk_size / 2;
            clip.samples.resize(n);
            std::vector<unsigned char> raw(chunk_size);
            in.read(reinterpret_cast<char*>(raw.data()), chunk_size);
            if (!in) throw UnsupportedFormatError(path + ": truncated data chunk");
            for (uint32_t i = 0; i < n; ++i) {
                const int16_t s = static_cast<int16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
                clip.samples[i] = static_cast<float>(s) / 32768.0f;
            }
            clip.sample_rate = static_cast<int>(rate);
            return clip;
        } else {
            in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    throw UnsupportedFormatError(path + ": no data chunk");
}

void write_wav(const std::string& path, const AudioClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write wav file: " + path);
    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint32_t data_bytes = n * 2;
    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);  // PCM
    write_u16(out, 1);  // mono
    write_u32(out, static_cast<uint32_t>(clip.sample_rate));
    write_u32(out, static_cast<uint32_t>(clip.sample_rate) * 2);
    write_u16(out, 2);
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_bytes);
    for (uint32_t i = 0; i < n; ++i) {
        const float x = std::clamp(clip.samples[i], -1.0f, 1.0f);
        const int16_t s = static_cast<int16_t>(std::lrint(x * 32767.0f));
        write_u16(out, static_cast<uint16_t>(s));
    }
    if (!out) throw IoError("short write: " + path);
}

double rms_dbfs(const AudioClip& clip) {
    if (clip.samples.empty()) return -300.0;
    double acc = 0.0;
    for (float s : clip.samples) acc += static_cast<double>(s) * s;
    const double rms = std::sqrt(acc / static_cast<double>(clip.samples.size()));
    if (rms <= 0.0) return -300.0;
    return 20.0 * std::log10(rms);
}

AudioClip normalize_dbfs(const AudioClip& clip, double target_dbfs) {
    double acc = 0.0;
    for (float s : clip.samples) acc += static_cast<double>(s) * s;
    const double rms =
        clip.samples.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(clip.samples.size()));
    if (rms <= 1e-8) throw SilentAudioError("clip is silent, cannot normalize");
    const double gain = std::pow(10.0, target_dbfs / 20.0) / rms;
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.resize(clip.samples.size());
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        out.samples[i] = std::clamp(static_cast<float>(clip.samples[i] * gain), -1.0f, 1.0f);
    }
    return out;
}

std::vector<AudioClip> extract_turn_utterances(const AudioClip& clip,
                                               const std::vector<TurnSpan>& turns) {
    constexpr double kPad = 0.010;       // widen each side by 10 ms
    constexpr double kTolerance = 0.050;  // clamp slack before rejecting
    const double dur = clip.duration_s();
    std::vector<AudioClip> out;
    out.reserve(turns.size());
    for (const TurnSpan& t : turns) {
        if (t.end_s <= t.start_s)
            throw InvalidSpanError("turn end must exceed start");
        if (t.start_s < -kTolerance || t.end_s > dur + kTolerance)
            throw InvalidSpanError("turn exceeds clip bounds");
        const double s = std::max(0.0, t.start_s - kPad);
        const double e = std::min(dur, t.end_s + kPad);
        const std::size_t i0 = static_cast<std::size_t>(std::llround(s * clip.sample_rate));
        std::size_t i1 = static_cast<std::size_t>(std::llround(e * clip.sample_rate));
        i1 = std::min(i1, clip.samples.size());
        AudioClip u;
        u.sample_rate = clip.sample_rate;
        u.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(i0),
                         clip.samples.begin() + static_cast<std::ptrdiff_t>(i1));
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<AudioClip> segment_fixed(const AudioClip& clip, double length_s) {
    if (length_s <= 0.0) throw ConfigError("segment length must be positive");
    const std::size_t seg = static_cast<std::size_t>(std::llround(length_s * clip.sample_rate));
    const std::size_t min_tail = static_cast<std::size_t>(clip.sample_rate);  // 1.0 s
    std::vector<AudioClip> out;
    std::size_t pos = 0;
    while (pos + seg <= clip.samples.size()) {
        AudioClip c;
        c.sample_rate = clip.sample_rate;
        c.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(pos),
                         clip.samples.begin() + static_cast<std::ptrdiff_t>(pos + seg));
        out.push_back(std::move(c));
        pos += seg;
    }
    const std::size_t tail = clip.samples.size() - pos;
    if (tail >= min_tail) {
        AudioClip c;
        c.sample_rate = clip.sample_rate;
        c.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(pos),
                         clip.samples.end());
        out.push_back(std::move(c));
    }
    return out;
}

AudioClip cross_channel_spectral_subtraction(const AudioClip& patient,
                                             const AudioClip& interviewer,
                                             const SubtractionParams& params) {
    if (patient.samples.size() != interviewer.samples.size())
        throw LengthMismatchError("channel lengths differ");
    if (patient.sample_rate != interviewer.sample_rate)
        throw RateMismatchError("channel sample rates differ");
    if (params.hop > params.fft_size || params.hop <= 0)
        throw ConfigError("hop must be in (0, fft_size]");

    const int n = params.fft_size;
    const int hop = params.hop;
    const std::size_t len = patient.samples.size();
    const std::vector<double> win = dsp::hann_periodic(static_cast<std::size_t>(n));

    // Pad by one full frame on each side so every original sample gets a
    // positive accumulated window weight.
    const std::size_t pad = static_cast<std::size_t>(n);
    const std::size_t plen = len + 2 * pad;

    std::vector<double> acc(plen, 0.0), wsum(plen, 0.0);
    std::vector<std::complex<double>> pf(static_cast<std::size_t>(n)),
        inf(static_cast<std::size_t>(n));

    for (std::size_t start = 0; start + static_cast<std::size_t>(n) <= plen;
         start += static_cast<std::size_t>(hop)) {
        for (int i = 0; i < n; ++i) {
            const std::size_t gi = start + static_cast<std::size_t>(i);
            const double p = (gi >= pad && gi < pad + len)
                                 ? static_cast<double>(patient.samples[gi - pad])
                                 : 0.0;
            const double q = (gi >= pad && gi < pad + len)
                                 ? static_cast<double>(interviewer.samples[gi - pad])
                                 : 0.0;
            pf[static_cast<std::size_t>(i)] = win[static_cast<std::size_t>(i)] * p;
            inf[static_cast<std::size_t>(i)] = win[static_cast<std::size_t>(i)] * q;
        }
        dsp::fft(pf, false);
        dsp::fft(inf, false);
        for (int i = 0; i < n; ++i) {
            const double mp = std::abs(pf[static_cast<std::size_t>(i)]);
            const double mi = std::abs(inf[static_cast<std::size_t>(i)]);
            const double target =
                std::max(mp - params.over_subtraction * mi, params.spectral_floor * mp);
            if (mp > 0.0) pf[static_cast<std::size_t>(i)] *= target / mp;
        }
        dsp::fft(pf, true);
        for (int i = 0; i < n; ++i) {
            const std::size_t gi = start + static_cast<std::size_t>(i);
            acc[gi] += win[static_cast<std::size_t>(i)] * pf[static_cast<std::size_t>(i)].real();
            wsum[gi] += win[static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)];
        }
    }

    AudioClip out;
    out.sample_rate = patient.sample_rate;
    out.samples.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        const double w = wsum[i + pad];
        const double v = w > 1e-12 ? acc[i + pad] / w : 0.0;
        out.samples[i] = std::clamp(static_cast<float>(v), -1.0f, 1.0f);
    }
    return out;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (target_rate <= 0) throw ConfigError("target rate must be positive");
    if (target_rate == clip.sample_rate) return clip;
    const int g = std::gcd(clip.sample_rate, target_rate);
    const int up = target_rate / g;
    const int down = clip.sample_rate / g;

    // Windowed-sinc low-pass at the smaller Nyquist. Cutoff is in cycles
    // per input sample (input Nyquist = 0.5).
    const double fc = 0.45 * std::min(1.0, static_cast<double>(up) / down);
    const int half = static_cast<int>(std::ceil(16.0 / (2.0 * fc)));
    const std::size_t out_len =
        static_cast<std::size_t>(static_cast<long long>(clip.samples.size()) * up / down);

    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);
    const std::ptrdiff_t n_in = static_cast<std::ptrdiff_t>(clip.samples.size());
    for (std::size_t m = 0; m < out_len; ++m) {
        // Input-time position of output sample m.
        const double t = static_cast<double>(m) * down / up;
        const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(std::floor(t));
        double acc = 0.0;
        for (std::ptrdiff_t k = center - half; k <= center + half + 1; ++k) {
            if (k < 0 || k >= n_in) continue;
            const double d = 2.0 * fc * (t - static_cast<double>(k));
            const double sinc = d == 0.0 ? 1.0 : std::sin(M_PI * d) / (M_PI * d);
            const double frac = (static_cast<double>(k) - t) / (static_cast<double>(half) + 1.0);
            if (std::abs(frac) >= 1.0) continue;
            const double taper = 0.5 + 0.5 * std::cos(M_PI * frac);
            acc += static_cast<double>(clip.samples[static_cast<std::size_t>(k)]) * 2.0 * fc *
                   sinc * taper;
        }
        out.samples[m] = std::clamp(static_cast<float>(acc), -1.0f, 1.0f);
    }
    return out;
}

}  // namespace gcnn
