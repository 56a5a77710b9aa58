#pragma once

#include <array>
#include <string>
#include <vector>

#include "gcnn/audio.hpp"

namespace gcnn {

struct FrameConfig {
    int frame_ms = 25;
    int hop_ms = 10;
};

/// Row-major real matrix, float storage.
struct FeatureMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> v;

    float& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

struct RowStats {
    std::vector<float> mean;
    std::vector<float> stddev;
};

/// Fixed row order of the 38 base descriptors. Deltas occupy rows 38..75
/// in the same order. Version 1.
struct LldRowLayout {
    static constexpr int kBaseRows = 38;
    static constexpr int kTotalRows = 76;
    static constexpr int kNumMfcc = 15;      // rows 1..15
    static constexpr int kNumLogMel = 8;     // rows 16..23
    static constexpr int kNumLsp = 8;        // rows 24..31
    // row 0: loudness
    // rows 32..34: f0_envelope, voicing_prob, f0_final
    // rows 35..37: jitter_local, jitter_ddp, shimmer_local
    static const std::array<std::string, kBaseRows>& row_names();
};

constexpr int kFeatureRows = 76;
constexpr int kFeatureFrames = 397;

/// Windowed (Hamming) frames, 25 ms / 10 ms by default. A clip shorter
/// than one frame yields a single zero-padded frame.
std::vector<std::vector<float>> frame_signal(const AudioClip& clip, const FrameConfig& cfg);

/// 38 x T base descriptor matrix; one column per frame.
FeatureMatrix extract_lld(const std::vector<std::vector<float>>& frames, int sample_rate,
                          const FrameConfig& cfg = FrameConfig{});

/// Appends delta-regression rows (window 2, edge replication): 38xT -> 76xT.
FeatureMatrix append_deltas(const FeatureMatrix& base);

/// Truncates/zero-pads to target_cols columns; optionally z-normalizes
/// each row (over the valid region only) with the given stats.
FeatureMatrix assemble_feature_matrix(const FeatureMatrix& lld, int target_cols = kFeatureFrames,
                                      const RowStats* stats = nullptr);

/// Per-row mean/std over all columns of the (unpadded) matrices.
RowStats compute_fold_stats(const std::vector<const FeatureMatrix*>& matrices);

/// Full pipeline: clip -> raw (unpadded) 76 x T_raw descriptor matrix.
FeatureMatrix extract_features(const AudioClip& clip, const FrameConfig& cfg = FrameConfig{});

/// Feature cache file: magic "LLDC", version u32, rows u32, cols u32,
/// row-major little-endian f32.
void write_feature_cache(const std::string& path, const FeatureMatrix& m);
FeatureMatrix read_feature_cache(const std::string& path);

}  // namespace gcnn
