#include "gcnn/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "gcnn/parallel.hpp"

namespace gcnn {

ClassLabel map_mmse_to_class(int score) {
    if (score < 0 || score > 30) throw OutOfRangeError("MMSE score must be in [0, 30]");
    if (score <= 23) return ClassLabel::D;
    if (score <= 26) return ClassLabel::M;
    return ClassLabel::H;
}

const char* class_name(ClassLabel label) {
    switch (label) {
        case ClassLabel::D: return "D";
        case ClassLabel::M: return "M";
        case ClassLabel::H: return "H";
    }
    return "?";
}

ClassLabel parse_class_label(const std::string& s) {
    if (s == "D" || s == "d") return ClassLabel::D;
    if (s == "M" || s == "m") return ClassLabel::M;
    if (s == "H" || s == "h") return ClassLabel::H;
    throw ConfigError("unknown class label: " + s);
}

Condition parse_condition(const std::string& s) {
    if (s == "dvh") return Condition::DvsH;
    if (s == "dvmh") return Condition::DvsMH;
    if (s == "dmvh") return Condition::DMvsH;
    if (s == "3class") return Condition::ThreeClass;
    throw ConfigError("unknown condition: " + s + " (expected dvh|dvmh|dmvh|3class)");
}

const char* condition_name(Condition c) {
    switch (c) {
        case Condition::DvsH: return "dvh";
        case Condition::DvsMH: return "dvmh";
        case Condition::DMvsH: return "dmvh";
        case Condition::ThreeClass: return "3class";
    }
    return "?";
}

int condition_class_count(Condition c) { return c == Condition::ThreeClass ? 3 : 2; }

std::optional<int> condition_relabel(ClassLabel label, Condition condition) {
    switch (condition) {
        case Condition::DvsH:
            if (label == ClassLabel::D) return 1;
            if (label == ClassLabel::H) return 0;
            return std::nullopt;
        case Condition::DvsMH:
            return label == ClassLabel::D ? 1 : 0;
        case Condition::DMvsH:
            return label == ClassLabel::H ? 0 : 1;
        case Condition::ThreeClass:
            return static_cast<int>(label);
    }
    return std::nullopt;
}

Confusion confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                           int class_count) {
    if (preds.size() != labels.size()) throw LengthMismatchError("preds/labels length mismatch");
    if (preds.empty()) throw EmptyInputError("no predictions");
    Confusion cm(static_cast<std::size_t>(class_count),
                 std::vector<long long>(static_cast<std::size_t>(class_count), 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count || preds[i] < 0 || preds[i] >= class_count)
            throw OutOfRangeError("class index out of range");
        ++cm[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
    }
    return cm;
}

namespace {
long long cm_total(const Confusion& cm) {
    long long total = 0;
    for (const auto& row : cm)
        for (long long v : row) total += v;
    return total;
}
}  // namespace

double accuracy(const Confusion& cm) {
    const long long total = cm_total(cm);
    if (total == 0) throw EmptyInputError("empty confusion matrix");
    long long diag = 0;
    for (std::size_t i = 0; i < cm.size(); ++i) diag += cm[i][i];
    return static_cast<double>(diag) / static_cast<double>(total);
}

double cohen_kappa(const Confusion& cm) {
    const long long total = cm_total(cm);
    if (total == 0) throw EmptyInputError("empty confusion matrix");
    const std::size_t n = cm.size();
    double po = 0.0, pe = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        po += static_cast<double>(cm[i][i]);
        long long row = 0, col = 0;
        for (std::size_t j = 0; j < n; ++j) {
            row += cm[i][j];
            col += cm[j][i];
        }
        pe += static_cast<double>(row) * static_cast<double>(col);
    }
    po /= static_cast<double>(total);
    pe /= static_cast<double>(total) * static_cast<double>(total);
    if (pe >= 1.0) return 0.0;
    return (po - pe) / (1.0 - pe);
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw LengthMismatchError("scores/labels length mismatch");
    long long pos = 0, neg = 0;
    for (int y : labels) (y == 1 ? pos : neg) += 1;
    if (pos == 0 || neg == 0) throw EmptyInputError("both classes required for ROC");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    long long tp = 0, fp = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        // Process ties in one step so the trapezoid matches pair counting.
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
        curve.points.push_back({s, fpr, tpr});
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    curve.auc = auc;
    return curve;
}

std::vector<DetPoint> det_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
    const RocCurve curve = roc_auc(scores, labels);
    std::vector<DetPoint> det;
    det.reserve(curve.points.size());
    for (const RocPoint& p : curve.points) det.push_back({p.threshold, p.fpr, 1.0 - p.tpr});
    return det;
}

int majority_vote(const std::vector<Prediction>& predictions, int class_count) {
    if (predictions.empty()) throw EmptyInputError("no segment predictions");
    std::vector<int> counts(static_cast<std::size_t>(class_count), 0);
    std::vector<double> mean_prob(static_cast<std::size_t>(class_count), 0.0);
    for (const Prediction& p : predictions) {
        ++counts[static_cast<std::size_t>(p.label)];
        for (int c = 0; c < class_count; ++c)
            mean_prob[static_cast<std::size_t>(c)] += p.probabilities[static_cast<std::size_t>(c)];
    }
    for (double& m : mean_prob) m /= static_cast<double>(predictions.size());

    const int max_count = *std::max_element(counts.begin(), counts.end());
    std::vector<int> tied;
    for (int c = 0; c < class_count; ++c)
        if (counts[static_cast<std::size_t>(c)] == max_count) tied.push_back(c);
    if (tied.size() == 1) return tied.front();

    if (class_count == 2) return mean_prob[1] >= 0.5 ? 1 : 0;
    int best = tied.front();
    for (int c : tied)
        if (mean_prob[static_cast<std::size_t>(c)] > mean_prob[static_cast<std::size_t>(best)])
            best = c;
    return best;
}

std::size_t duration_budget_select(const std::vector<double>& segment_durations_s,
                                   double budget_s) {
    if (segment_durations_s.empty()) throw EmptyInputError("session has no segments");
    if (budget_s <= 0.0 || std::isinf(budget_s)) return segment_durations_s.size();
    double cum = 0.0;
    std::size_t n = 0;
    for (double d : segment_durations_s) {
        if (cum + d > budget_s + 1e-9) break;
        cum += d;
        ++n;
    }
    return std::max<std::size_t>(n, 1);
}

FoldPlan plan_folds(const std::vector<std::pair<std::string, ClassLabel>>& speaker_labels,
                    int k, std::uint64_t seed) {
    struct Speaker {
        std::string id;
        int sessions = 0;
        std::array<int, 3> per_class{0, 0, 0};
    };
    std::map<std::string, Speaker> by_id;
    for (const auto& [spk, label] : speaker_labels) {
        Speaker& s = by_id[spk];
        s.id = spk;
        ++s.sessions;
        ++s.per_class[static_cast<std::size_t>(static_cast<int>(label))];
    }
    if (static_cast<int>(by_id.size()) < k)
        throw EmptyInputError("fewer speakers than folds");

    std::vector<Speaker> speakers;
    speakers.reserve(by_id.size());
    for (auto& [id, s] : by_id) speakers.push_back(s);

    // Seeded shuffle breaks ties among equal session counts; the stable
    // sort then orders by descending session count.
    nn::Rng rng(seed);
    std::shuffle(speakers.begin(), speakers.end(), rng);
    std::stable_sort(speakers.begin(), speakers.end(),
                     [](const Speaker& a, const Speaker& b) { return a.sessions > b.sessions; });

    std::vector<long long> fold_sessions(static_cast<std::size_t>(k), 0);
    std::vector<std::array<long long, 3>> fold_class(static_cast<std::size_t>(k),
                                                     {0, 0, 0});
    FoldPlan plan;
    plan.k = k;
    for (const Speaker& s : speakers) {
        const int cls = static_cast<int>(
            std::max_element(s.per_class.begin(), s.per_class.end()) - s.per_class.begin());
        int best = 0;
        for (int f = 1; f < k; ++f) {
            const auto key = [&](int fold) {
                return std::make_tuple(fold_sessions[static_cast<std::size_t>(fold)],
                                       fold_class[static_cast<std::size_t>(fold)]
                                                 [static_cast<std::size_t>(cls)],
                                       fold);
            };
            if (key(f) < key(best)) best = f;
        }
        plan.assignment[s.id] = best;
        fold_sessions[static_cast<std::size_t>(best)] += s.sessions;
        for (int c = 0; c < 3; ++c)
            fold_class[static_cast<std::size_t>(best)][static_cast<std::size_t>(c)] +=
                s.per_class[static_cast<std::size_t>(c)];
    }
    return plan;
}

CvReport evaluate_cv(const std::vector<EvalSession>& sessions, ModelConfig mcfg,
                     TrainConfig tcfg, Condition condition,
                     const std::vector<double>& budgets_s, int k,
                     std::uint64_t fold_plan_seed) {
    const int classes = condition_class_count(condition);
    mcfg.classes = classes;

    std::vector<std::pair<std::string, ClassLabel>> speaker_labels;
    for (const EvalSession& s : sessions)
        if (condition_relabel(s.label, condition)) speaker_labels.emplace_back(s.speaker_id, s.label);

    CvReport report;
    report.condition = condition;
    report.plan = plan_folds(speaker_labels, k, fold_plan_seed);

    struct FoldResult {
        // outcomes[budget][session]
        std::vector<std::vector<SessionOutcome>> outcomes;
        std::vector<int> seg_preds, seg_labels;
        std::set<std::string> train_speakers, test_speakers;
    };
    std::vector<FoldResult> fold_results(static_cast<std::size_t>(k));

    parallel_for(k, [&](int fold) {
        FoldResult& fr = fold_results[static_cast<std::size_t>(fold)];
        fr.outcomes.resize(budgets_s.size());

        std::vector<TrainSegment> train;
        std::vector<const FeatureMatrix*> train_mats;
        std::vector<const EvalSession*> test;
        for (const EvalSession& s : sessions) {
            const auto relabeled = condition_relabel(s.label, condition);
            if (!relabeled) continue;
            const int assigned = report.plan.assignment.at(s.speaker_id);
            if (assigned == fold) {
                test.push_back(&s);
                fr.test_speakers.insert(s.speaker_id);
            } else {
                fr.train_speakers.insert(s.speaker_id);
                for (const SegmentFeature& seg : s.segments) {
                    train.push_back({&seg.features, *relabeled});
                    train_mats.push_back(&seg.features);
                }
            }
        }
        if (train.empty() || test.empty()) return;

        const RowStats stats = compute_fold_stats(train_mats);
        TrainConfig fold_cfg = tcfg;
        fold_cfg.seed = tcfg.seed + static_cast<std::uint64_t>(fold);
        nn::Model<float> model = train_fold(train, mcfg, fold_cfg, stats);

        for (const EvalSession* s : test) {
            const int label = *condition_relabel(s->label, condition);
            std::vector<Prediction> preds;
            std::vector<double> durations;
            preds.reserve(s->segments.size());
            for (const SegmentFeature& seg : s->segments) {
                const FeatureMatrix m =
                    assemble_feature_matrix(seg.features, mcfg.input_frames, &stats);
                preds.push_back(predict_segment(model, m));
                durations.push_back(seg.duration_s);
                fr.seg_preds.push_back(preds.back().label);
                fr.seg_labels.push_back(label);
            }
            for (std::size_t bi = 0; bi < budgets_s.size(); ++bi) {
                const std::size_t n = duration_budget_select(durations, budgets_s[bi]);
                const std::vector<Prediction> chosen(preds.begin(),
                                                     preds.begin() + static_cast<std::ptrdiff_t>(n));
                SessionOutcome oc;
                oc.session_id = s->session_id;
                oc.fold = fold;
                oc.label = label;
                oc.prediction = majority_vote(chosen, classes);
                if (classes == 2) {
                    double mean = 0.0;
                    for (const Prediction& p : chosen) mean += p.probabilities[1];
                    oc.positive_score = mean / static_cast<double>(chosen.size());
                }
                fr.outcomes[bi].push_back(std::move(oc));
            }
        }
    });

    for (const FoldResult& fr : fold_results) {
        report.fold_speakers.emplace_back(
            std::vector<std::string>(fr.train_speakers.begin(), fr.train_speakers.end()),
            std::vector<std::string>(fr.test_speakers.begin(), fr.test_speakers.end()));
    }

    std::vector<int> all_seg_preds, all_seg_labels;
    for (const FoldResult& fr : fold_results) {
        all_seg_preds.insert(all_seg_preds.end(), fr.seg_preds.begin(), fr.seg_preds.end());
        all_seg_labels.insert(all_seg_labels.end(), fr.seg_labels.begin(), fr.seg_labels.end());
    }
    if (!all_seg_preds.empty()) {
        report.pooled_segment_cm = confusion_matrix(all_seg_preds, all_seg_labels, classes);
        report.pooled_segment_accuracy = accuracy(report.pooled_segment_cm);
    }

    for (std::size_t bi = 0; bi < budgets_s.size(); ++bi) {
        BudgetMetrics bm;
        bm.budget_s = budgets_s[bi];
        std::vector<int> pooled_preds, pooled_labels;
        std::vector<double> pooled_scores;
        std::vector<int> pooled_score_labels;
        for (int fold = 0; fold < k; ++fold) {
            const auto& outcomes = fold_results[static_cast<std::size_t>(fold)].outcomes;
            if (outcomes.empty() || outcomes[bi].empty()) continue;
            std::vector<int> preds, labels;
            for (const SessionOutcome& oc : outcomes[bi]) {
                preds.push_back(oc.prediction);
                labels.push_back(oc.label);
                pooled_preds.push_back(oc.prediction);
                pooled_labels.push_back(oc.label);
                if (classes == 2) {
                    pooled_scores.push_back(oc.positive_score);
                    pooled_score_labels.push_back(oc.label);
                }
                bm.outcomes.push_back(oc);
            }
            bm.fold_cm.push_back(confusion_matrix(preds, labels, classes));
            bm.fold_accuracy.push_back(accuracy(bm.fold_cm.back()));
        }
        if (!pooled_preds.empty()) {
            bm.pooled_cm = confusion_matrix(pooled_preds, pooled_labels, classes);
            bm.pooled_accuracy = accuracy(bm.pooled_cm);
            bm.pooled_kappa = cohen_kappa(bm.pooled_cm);
            bm.mean_accuracy =
                std::accumulate(bm.fold_accuracy.begin(), bm.fold_accuracy.end(), 0.0) /
                static_cast<double>(bm.fold_accuracy.size());
            if (classes == 2) {
                bool has_pos = false, has_neg = false;
                for (int y : pooled_score_labels) (y == 1 ? has_pos : has_neg) = true;
                if (has_pos && has_neg) {
                    bm.roc = roc_auc(pooled_scores, pooled_score_labels);
                    bm.det = det_points(pooled_scores, pooled_score_labels);
                }
            }
        }
        report.budgets.push_back(std::move(bm));
    }
    return report;
}

}  // namespace gcnn
