#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gcnn/audio.hpp"
#include "gcnn/eval.hpp"
#include "gcnn/manifest.hpp"

namespace gcnn {

/// Per-class paralinguistic synthesis profile.
struct ClassProfile {
    double f0_mean_hz = 140.0;
    double f0_speaker_std_hz = 8.0;   // one offset drawn per speaker
    double jitter = 0.01;             // per-period F0 perturbation level
    double rate_sylps = 3.0;          // syllables per second
    double am_depth = 0.3;
};

struct SynthSpec {
    int speakers_per_class = 20;
    int sessions_per_speaker = 2;
    double session_duration_s = 60.0;
    int sample_rate = 16000;
    std::uint64_t seed = 42;
    std::vector<std::pair<ClassLabel, ClassProfile>> classes;

    void validate() const;
};

/// Two-class (D vs H) spec with an F0 gap in Hz; used by tests and docs.
SynthSpec default_binary_spec(double f0_gap_hz = 60.0);
SynthSpec default_three_class_spec();

std::string synth_speaker_id(const SynthSpec& spec, int class_idx, int speaker_idx);
std::string synth_session_id(const SynthSpec& spec, int class_idx, int speaker_idx,
                             int session_idx);

/// Deterministic session audio: voiced harmonic syllables with per-period
/// F0 jitter at the class level, separated by silence at the class
/// speaking rate.
AudioClip synth_session(const SynthSpec& spec, int class_idx, int speaker_idx, int session_idx);

/// Synthetic MMSE inside the class range (D 0-23, M 24-26, H 27-30).
int synth_mmse(const SynthSpec& spec, int class_idx, int speaker_idx, int session_idx);

/// Writes all WAVs plus manifest.jsonl into out_dir; returns the records.
std::vector<ManifestRecord> synth_dataset(const SynthSpec& spec, const std::string& out_dir);

/// Key-value spec file loader (documented in the README).
SynthSpec load_synth_spec(const std::string& path);

}  // namespace gcnn
