#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gcnn/model.hpp"
#include "gcnn/train.hpp"

namespace gcnn {

enum class ClassLabel { D = 0, M = 1, H = 2 };

enum class Condition { DvsH, DvsMH, DMvsH, ThreeClass };

ClassLabel map_mmse_to_class(int score);
const char* class_name(ClassLabel label);
ClassLabel parse_class_label(const std::string& s);
Condition parse_condition(const std::string& s);
const char* condition_name(Condition c);
int condition_class_count(Condition c);

/// Class index under a condition, or nullopt when the label is excluded.
/// Binary conditions: 1 = positive (dementia side), 0 = negative.
std::optional<int> condition_relabel(ClassLabel label, Condition condition);

using Confusion = std::vector<std::vector<long long>>;

Confusion confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                           int class_count);
double accuracy(const Confusion& cm);
double cohen_kappa(const Confusion& cm);

struct RocPoint {
    double threshold = 0.0;  // score at or above which a sample is positive
    double fpr = 0.0;
    double tpr = 0.0;
};
struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};
/// ROC over positive-class scores; trapezoidal AUC (equals pair counting
/// with ties scored 1/2).
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct DetPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double fnr = 0.0;
};
std::vector<DetPoint> det_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels);

/// Most frequent label; ties broken by mean probability.
int majority_vote(const std::vector<Prediction>& predictions, int class_count);

/// Number of earliest segments whose cumulative duration stays within the
/// budget; always at least one. Budget <= 0 or infinity selects all.
std::size_t duration_budget_select(const std::vector<double>& segment_durations_s,
                                   double budget_s);

struct FoldPlan {
    int k = 10;
    std::map<std::string, int> assignment;  // speaker_id -> fold
};

/// Speaker-disjoint, greedily balanced assignment. Deterministic given
/// (sessions, seed).
FoldPlan plan_folds(const std::vector<std::pair<std::string, ClassLabel>>& speaker_labels,
                    int k, std::uint64_t seed);

struct SegmentFeature {
    FeatureMatrix features;  // raw (unpadded) 76 x T_raw
    double start_s = 0.0;
    double duration_s = 0.0;
};

struct EvalSession {
    std::string session_id;
    std::string speaker_id;
    ClassLabel label = ClassLabel::H;
    std::optional<int> mmse;
    std::vector<SegmentFeature> segments;
};

struct SessionOutcome {
    std::string session_id;
    int fold = 0;
    int label = 0;
    int prediction = 0;
    double positive_score = 0.0;  // mean positive-class probability (binary)
};

constexpr double kBudgetAll = std::numeric_limits<double>::infinity();

struct BudgetMetrics {
    double budget_s = kBudgetAll;
    std::vector<Confusion> fold_cm;
    std::vector<double> fold_accuracy;
    Confusion pooled_cm;
    double mean_accuracy = 0.0;
    double pooled_accuracy = 0.0;
    double pooled_kappa = 0.0;
    RocCurve roc;             // binary conditions only
    std::vector<DetPoint> det;
    std::vector<SessionOutcome> outcomes;
};

struct CvReport {
    Condition condition = Condition::DvsH;
    FoldPlan plan;
    std::vector<BudgetMetrics> budgets;
    Confusion pooled_segment_cm;  // segment-level, all segments
    double pooled_segment_accuracy = 0.0;
    // Per fold: train speakers, test speakers (audit trail).
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> fold_speakers;
};

/// Full speaker-disjoint cross-validation: per fold trains on the
/// condition-relabeled training sessions and scores the held-out fold at
/// every duration budget. Folds run in parallel with independent seeds.
CvReport evaluate_cv(const std::vector<EvalSession>& sessions, ModelConfig mcfg,
                     TrainConfig tcfg, Condition condition,
                     const std::vector<double>& budgets_s, int k = 10,
                     std::uint64_t fold_plan_seed = 0);

}  // namespace gcnn
