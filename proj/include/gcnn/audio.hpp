#pragma once

#include <string>
#include <vector>

#include "gcnn/errors.hpp"

namespace gcnn {

/// Mono PCM audio held as floats in [-1, 1].
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 16000;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

/// One speaker turn, in seconds from session start.
struct TurnSpan {
    double start_s = 0.0;
    double end_s = 0.0;
};

struct SubtractionParams {
    int fft_size = 512;
    int hop = 128;
    double over_subtraction = 1.0;  // alpha
    double spectral_floor = 0.01;   // beta
};

/// Reads a RIFF/WAVE file. Only 16-bit PCM mono is accepted.
AudioClip read_wav(const std::string& path);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1].
void write_wav(const std::string& path, const AudioClip& clip);

/// RMS level in dB relative to full scale. -inf for silence is avoided by
/// callers checking rms first.
double rms_dbfs(const AudioClip& clip);

/// Applies a pure gain so the RMS level hits target_dbfs.
/// Throws SilentAudioError when RMS <= 1e-8.
AudioClip normalize_dbfs(const AudioClip& clip, double target_dbfs);

/// Cuts one clip per turn, widened by 10 ms on both sides and clamped to
/// the clip bounds. Turns more than 50 ms outside the clip are rejected.
std::vector<AudioClip> extract_turn_utterances(const AudioClip& clip,
                                               const std::vector<TurnSpan>& turns);

/// Consecutive non-overlapping segments of length_s seconds. A trailing
/// remainder is kept only when it is at least 1.0 s long.
std::vector<AudioClip> segment_fixed(const AudioClip& clip, double length_s);

/// Removes interviewer leakage from the patient channel:
/// |out| = max(|P| - alpha*|I|, beta*|P|) per STFT bin, patient phase,
/// overlap-add reconstruction. Output length equals input length.
AudioClip cross_channel_spectral_subtraction(const AudioClip& patient,
                                             const AudioClip& interviewer,
                                             const SubtractionParams& params);

/// Linear-phase polyphase (windowed-sinc) resampler.
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace gcnn
