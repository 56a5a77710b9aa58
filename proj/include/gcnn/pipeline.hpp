#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gcnn/eval.hpp"
#include "gcnn/manifest.hpp"
#include "gcnn/train.hpp"

namespace gcnn {

struct PreprocessConfig {
    std::optional<double> target_dbfs;  // unset: mean RMS dBFS over the dataset
    double segment_seconds = 4.0;
    SubtractionParams subtraction;
    bool allow_resample = false;  // off: reject rates outside {16000, 44100}
    FrameConfig frames;
};

struct ExtractResult {
    int ok_sessions = 0;
    int failed_sessions = 0;
    double target_dbfs_used = 0.0;
    std::vector<std::string> errors;
};

/// Per session: optional cross-channel subtraction, dBFS normalization,
/// turn-based or fixed-length segmentation, LLD extraction, feature cache
/// files plus an index.jsonl mapping sessions to segments.
ExtractResult run_extract(const std::vector<ManifestRecord>& manifest,
                          const PreprocessConfig& cfg, const std::string& out_dir);

/// Loads index.jsonl and every referenced feature cache.
std::vector<EvalSession> load_eval_sessions(const std::string& features_dir);

struct TrainFoldResult {
    std::vector<std::string> train_speakers, test_speakers;
    std::vector<EpochLogEntry> log;
};

/// Trains the model for one CV fold (sessions from every other fold) and
/// writes the self-contained weight file (config + fold stats + params).
TrainFoldResult run_train_fold(const std::vector<EvalSession>& sessions, Condition condition,
                               int fold, int k, std::uint64_t fold_plan_seed,
                               const ModelConfig& mcfg, const TrainConfig& tcfg,
                               const std::string& model_out);

/// Writes summary.txt, metrics.csv, roc.csv, det.csv, confusion.csv and
/// audit.log for a finished CV report.
void write_report(const CvReport& report, const std::string& out_dir);

struct PredictResult {
    Prediction session;
    std::vector<Prediction> segments;
};

/// End-to-end single-session inference from audio.
PredictResult run_predict(const std::string& model_path, const AudioClip& patient,
                          const AudioClip* interviewer, const PreprocessConfig& cfg);

/// Budget list parser: "4,8,20,40,60,300,all" -> seconds (all = infinity).
std::vector<double> parse_budgets(const std::string& list);
std::string budget_name(double budget_s);

}  // namespace gcnn
