#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <random>

#include "gcnn/audio.hpp"
#include "gcnn/dsp.hpp"

using namespace gcnn;

namespace {

AudioClip make_tone(double freq, double seconds, int rate, double amp = 0.5) {
    AudioClip clip;
    clip.sample_rate = rate;
    const std::size_t n = static_cast<std::size_t>(seconds * rate);
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        clip.samples[i] =
            static_cast<float>(amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate));
    return clip;
}

double band_energy(const AudioClip& clip, double freq, double bw) {
    const std::size_t n = dsp::next_pow2(clip.samples.size());
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) buf[i] = clip.samples[i];
    dsp::fft(buf, false);
    const double bin_hz = static_cast<double>(clip.sample_rate) / static_cast<double>(n);
    double e = 0.0;
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double f = static_cast<double>(k) * bin_hz;
        if (std::abs(f - freq) <= bw) e += std::norm(buf[k]);
    }
    return e;
}

}  // namespace

TEST_CASE("wav files round-trip PCM16 mono") {
    const AudioClip tone = make_tone(440.0, 4.0, 16000);
    CHECK(tone.samples.size() == 64000);

    const auto path = std::filesystem::temp_directory_path() / "gcnn_wav_roundtrip.wav";
    write_wav(path.string(), tone);
    const AudioClip back = read_wav(path.string());
    CHECK(back.sample_rate == 16000);
    REQUIRE(back.samples.size() == tone.samples.size());
    for (std::size_t i = 0; i < back.samples.size(); i += 997)
        CHECK(std::abs(back.samples[i] - tone.samples[i]) <= 1.0f / 32768.0f);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(read_wav("/nonexistent/clip.wav"), NotFoundError);
}

TEST_CASE("44.1 kHz rate is preserved on read") {
    const AudioClip tone = make_tone(440.0, 0.5, 44100);
    const auto path = std::filesystem::temp_directory_path() / "gcnn_wav_441.wav";
    write_wav(path.string(), tone);
    CHECK(read_wav(path.string()).sample_rate == 44100);
    std::filesystem::remove(path);
}

TEST_CASE("RMS level and dBFS normalization") {
    AudioClip square;
    square.sample_rate = 16000;
    square.samples.assign(16000, 1.0f);
    CHECK(rms_dbfs(square) == doctest::Approx(0.0).epsilon(1e-6));

    AudioClip tone = make_tone(440.0, 1.0, 16000, 0.5);
    // RMS of a 0.5-amplitude sine is 0.5/sqrt(2) = -9.03 dBFS.
    CHECK(rms_dbfs(tone) == doctest::Approx(-9.0309).epsilon(1e-3));

    const AudioClip normalized = normalize_dbfs(tone, -26.0);
    CHECK(std::abs(rms_dbfs(normalized) - (-26.0)) < 0.01);

    // -30 -> -26 is a pure +4 dB gain.
    AudioClip at30 = normalize_dbfs(tone, -30.0);
    const AudioClip at26 = normalize_dbfs(at30, -26.0);
    const double gain = at26.samples[1000] / at30.samples[1000];
    CHECK(20.0 * std::log10(gain) == doctest::Approx(4.0).epsilon(1e-3));

    AudioClip silent;
    silent.sample_rate = 16000;
    silent.samples.assign(1600, 0.0f);
    CHECK_THROWS_AS(normalize_dbfs(silent, -26.0), SilentAudioError);
}

TEST_CASE("fixed-length segmentation with the 1-second remainder rule") {
    const AudioClip ten = make_tone(100.0, 10.0, 16000);
    const auto segs10 = segment_fixed(ten, 4.0);
    REQUIRE(segs10.size() == 3);
    CHECK(segs10[0].samples.size() == 64000);
    CHECK(segs10[1].samples.size() == 64000);
    CHECK(segs10[2].samples.size() == 32000);  // 2 s remainder kept

    CHECK(segment_fixed(make_tone(100.0, 8.0, 16000), 4.0).size() == 2);
    CHECK(segment_fixed(make_tone(100.0, 4.5, 16000), 4.0).size() == 1);  // 0.5 s dropped
    CHECK(segment_fixed(AudioClip{}, 4.0).empty());

    // Segments concatenate sample-exactly to the original prefix.
    std::size_t offset = 0;
    for (const AudioClip& s : segs10) {
        for (std::size_t i = 0; i < s.samples.size(); ++i)
            CHECK(s.samples[i] == ten.samples[offset + i]);
        offset += s.samples.size();
    }
    CHECK(offset == ten.samples.size());
}

TEST_CASE("turn extraction widens, clamps, and validates spans") {
    const AudioClip clip = make_tone(100.0, 2.0, 16000);
    const std::vector<TurnSpan> turns = {{0.5, 1.0}, {0.0, 0.3}, {1.5, 2.0}};
    const auto utts = extract_turn_utterances(clip, turns);
    REQUIRE(utts.size() == 3);
    // 10 ms widening on both sides: 0.5 s span becomes 0.52 s.
    CHECK(utts[0].samples.size() == static_cast<std::size_t>(0.52 * 16000));
    // Clamped at the start: only the trailing 10 ms is added.
    CHECK(utts[1].samples.size() == static_cast<std::size_t>(0.31 * 16000));
    // Clamped at the end.
    CHECK(utts[2].samples.size() == static_cast<std::size_t>(0.51 * 16000));

    // 50 ms tolerance: slightly past the end is accepted, far past throws.
    CHECK(extract_turn_utterances(clip, {{1.9, 2.04}}).size() == 1);
    CHECK_THROWS_AS(extract_turn_utterances(clip, {{1.9, 2.2}}), InvalidSpanError);
    CHECK_THROWS_AS(extract_turn_utterances(clip, {{1.0, 0.5}}), InvalidSpanError);
}

TEST_CASE("spectral subtraction with a silent interviewer is near identity") {
    const AudioClip patient = make_tone(300.0, 2.0, 16000, 0.4);
    AudioClip silent;
    silent.sample_rate = 16000;
    silent.samples.assign(patient.samples.size(), 0.0f);

    const AudioClip out = cross_channel_spectral_subtraction(patient, silent, SubtractionParams{});
    REQUIRE(out.samples.size() == patient.samples.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double d = out.samples[i] - patient.samples[i];
        num += d * d;
        den += static_cast<double>(patient.samples[i]) * patient.samples[i];
    }
    CHECK(std::sqrt(num / den) < 1e-3);
}

TEST_CASE("spectral subtraction attenuates interviewer leakage") {
    // Patient channel: voice tone at 220 Hz plus leakage at 1200 Hz that
    // matches the interviewer channel.
    AudioClip patient = make_tone(220.0, 2.0, 16000, 0.4);
    const AudioClip interviewer = make_tone(1200.0, 2.0, 16000, 0.3);
    for (std::size_t i = 0; i < patient.samples.size(); ++i)
        patient.samples[i] += 0.8f * interviewer.samples[i];

    const AudioClip cleaned =
        cross_channel_spectral_subtraction(patient, interviewer, SubtractionParams{});
    const double before = band_energy(patient, 1200.0, 40.0);
    const double after = band_energy(cleaned, 1200.0, 40.0);
    const double kept = band_energy(cleaned, 220.0, 40.0) / band_energy(patient, 220.0, 40.0);
    CHECK(10.0 * std::log10(before / after) > 10.0);  // >10 dB leakage reduction
    CHECK(kept > 0.5);                                // voice band mostly preserved

    AudioClip shorter = interviewer;
    shorter.samples.resize(100);
    CHECK_THROWS_AS(cross_channel_spectral_subtraction(patient, shorter, SubtractionParams{}),
                    LengthMismatchError);
    AudioClip wrong_rate = interviewer;
    wrong_rate.sample_rate = 8000;
    CHECK_THROWS_AS(cross_channel_spectral_subtraction(patient, wrong_rate, SubtractionParams{}),
                    RateMismatchError);
}

TEST_CASE("resampling preserves tone frequency") {
    const AudioClip hi = make_tone(440.0, 1.0, 44100, 0.5);
    const AudioClip lo = resample(hi, 16000);
    CHECK(lo.sample_rate == 16000);
    CHECK(std::abs(static_cast<double>(lo.samples.size()) - 16000.0) < 50.0);

    // Dominant energy stays at 440 Hz.
    const double at_tone = band_energy(lo, 440.0, 30.0);
    const double total = band_energy(lo, 4000.0, 4000.0);
    CHECK(at_tone / total > 0.9);
}
