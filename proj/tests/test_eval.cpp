#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gcnn/eval.hpp"

using namespace gcnn;

namespace {

// O(n^2) pair-counting AUC, the independent dual of the trapezoidal curve:
// ties between a positive and a negative score count one half.
double pair_count_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] == 1) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

Prediction make_pred(int label, float p_pos) {
    return Prediction{label, {1.0f - p_pos, p_pos}};
}

}  // namespace

TEST_CASE("session-level accuracy matches the published 73.1%") {
    const Confusion cm = {{189, 66}, {65, 168}};
    CHECK(std::abs(accuracy(cm) - 0.7316) < 5e-4);
    CHECK(std::abs(accuracy(cm) - 357.0 / 488.0) < 1e-12);
}

TEST_CASE("segment-level accuracy matches the published 65.7%") {
    const Confusion cm = {{2340, 936}, {1213, 1778}};
    CHECK(std::abs(accuracy(cm) - 0.6571) < 5e-4);
    CHECK(std::abs(accuracy(cm) - 4118.0 / 6267.0) < 1e-12);
}

TEST_CASE("Cohen's kappa against a hand-computed oracle") {
    // po = 357/488; pe = (255*254 + 233*234)/488^2; kappa = (po-pe)/(1-pe)
    // = 0.462121 (hand-derived).
    const Confusion cm = {{189, 66}, {65, 168}};
    CHECK(std::abs(cohen_kappa(cm) - 0.462121) < 1e-3);

    const Confusion perfect = {{10, 0}, {0, 10}};
    CHECK(cohen_kappa(perfect) == doctest::Approx(1.0));
    const Confusion chance = {{5, 5}, {5, 5}};
    CHECK(cohen_kappa(chance) == doctest::Approx(0.0));
}

TEST_CASE("confusion matrix counting and input validation") {
    const Confusion cm = confusion_matrix({0, 1, 1, 0, 1}, {0, 1, 0, 0, 1}, 2);
    CHECK(cm[0][0] == 2);
    CHECK(cm[0][1] == 1);
    CHECK(cm[1][0] == 0);
    CHECK(cm[1][1] == 2);
    CHECK_THROWS_AS(confusion_matrix({0}, {0, 1}, 2), LengthMismatchError);
    CHECK_THROWS_AS(confusion_matrix({}, {}, 2), EmptyInputError);
    CHECK_THROWS_AS(confusion_matrix({2}, {0}, 2), OutOfRangeError);
}

TEST_CASE("trapezoidal AUC equals pair counting on tied random scores") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> score(0, 9);  // coarse grid forces ties
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        bool pos = false, neg = false;
        for (int i = 0; i < 120; ++i) {
            scores.push_back(score(rng) / 10.0);
            labels.push_back(coin(rng));
            (labels.back() ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        const RocCurve curve = roc_auc(scores, labels);
        CHECK(std::abs(curve.auc - pair_count_auc(scores, labels)) < 1e-9);
    }
}

TEST_CASE("ROC endpoints and degenerate cases") {
    const RocCurve sep = roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    CHECK(sep.auc == doctest::Approx(1.0));
    CHECK(sep.points.front().fpr == 0.0);
    CHECK(sep.points.front().tpr == 0.0);
    CHECK(sep.points.back().fpr == doctest::Approx(1.0));
    CHECK(sep.points.back().tpr == doctest::Approx(1.0));

    const RocCurve tied = roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
    CHECK(tied.auc == doctest::Approx(0.5));

    CHECK_THROWS_AS(roc_auc({0.5}, {1}), EmptyInputError);
    CHECK_THROWS_AS(roc_auc({0.5, 0.2}, {1}), LengthMismatchError);
}

TEST_CASE("DET curve is FPR nondecreasing and FNR nonincreasing") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 200; ++i) {
        scores.push_back(score(rng));
        labels.push_back(coin(rng));
    }
    const auto det = det_points(scores, labels);
    for (std::size_t i = 1; i < det.size(); ++i) {
        CHECK(det[i].fpr >= det[i - 1].fpr);
        CHECK(det[i].fnr <= det[i - 1].fnr);
    }
    CHECK(det.front().fnr == doctest::Approx(1.0));
    CHECK(det.back().fnr == doctest::Approx(0.0));
}

TEST_CASE("majority vote with probability tie-break") {
    CHECK(majority_vote({make_pred(1, 0.9f), make_pred(1, 0.8f), make_pred(0, 0.1f)}, 2) == 1);
    CHECK(majority_vote({make_pred(0, 0.2f), make_pred(0, 0.3f), make_pred(1, 0.9f)}, 2) == 0);
    // 1-1 tie: mean positive probability (0.9 + 0.4)/2 = 0.65 >= 0.5 -> 1.
    CHECK(majority_vote({make_pred(1, 0.9f), make_pred(0, 0.4f)}, 2) == 1);
    // 1-1 tie the other way: (0.6 + 0.1)/2 = 0.35 -> 0.
    CHECK(majority_vote({make_pred(1, 0.6f), make_pred(0, 0.1f)}, 2) == 0);
    CHECK_THROWS_AS(majority_vote({}, 2), EmptyInputError);

    const Prediction a{0, {0.5f, 0.2f, 0.3f}};
    const Prediction b{2, {0.1f, 0.2f, 0.7f}};
    CHECK(majority_vote({a, b}, 3) == 2);  // tie, class 2 has higher mean prob
}

TEST_CASE("duration budget selection") {
    const std::vector<double> four_s = {4.0, 4.0, 4.0, 4.0};
    CHECK(duration_budget_select(four_s, 8.0) == 2);
    CHECK(duration_budget_select(four_s, 4.0) == 1);
    CHECK(duration_budget_select(four_s, 2.0) == 1);  // always at least one
    CHECK(duration_budget_select(four_s, kBudgetAll) == 4);
    CHECK(duration_budget_select(four_s, -1.0) == 4);
    CHECK(duration_budget_select({3.0, 2.0, 2.0}, 5.0) == 2);
    CHECK_THROWS_AS(duration_budget_select({}, 4.0), EmptyInputError);
}

TEST_CASE("MMSE score to class mapping boundaries") {
    CHECK(map_mmse_to_class(0) == ClassLabel::D);
    CHECK(map_mmse_to_class(23) == ClassLabel::D);
    CHECK(map_mmse_to_class(24) == ClassLabel::M);
    CHECK(map_mmse_to_class(26) == ClassLabel::M);
    CHECK(map_mmse_to_class(27) == ClassLabel::H);
    CHECK(map_mmse_to_class(30) == ClassLabel::H);
    CHECK_THROWS_AS(map_mmse_to_class(-1), OutOfRangeError);
    CHECK_THROWS_AS(map_mmse_to_class(31), OutOfRangeError);
}

TEST_CASE("condition relabeling") {
    CHECK(condition_relabel(ClassLabel::D, Condition::DvsH) == 1);
    CHECK(condition_relabel(ClassLabel::H, Condition::DvsH) == 0);
    CHECK(!condition_relabel(ClassLabel::M, Condition::DvsH));

    CHECK(condition_relabel(ClassLabel::D, Condition::DvsMH) == 1);
    CHECK(condition_relabel(ClassLabel::M, Condition::DvsMH) == 0);
    CHECK(condition_relabel(ClassLabel::H, Condition::DvsMH) == 0);

    CHECK(condition_relabel(ClassLabel::D, Condition::DMvsH) == 1);
    CHECK(condition_relabel(ClassLabel::M, Condition::DMvsH) == 1);
    CHECK(condition_relabel(ClassLabel::H, Condition::DMvsH) == 0);

    CHECK(condition_relabel(ClassLabel::M, Condition::ThreeClass) == 1);
    CHECK(parse_condition("dvh") == Condition::DvsH);
    CHECK_THROWS_AS(parse_condition("nope"), ConfigError);
}

TEST_CASE("fold planning: 267 single-session speakers split into 26/27") {
    std::vector<std::pair<std::string, ClassLabel>> speakers;
    for (int i = 0; i < 267; ++i) {
        std::string id = "spk" + std::to_string(1000 + i);
        speakers.emplace_back(id, i % 2 == 0 ? ClassLabel::D : ClassLabel::H);
    }
    const FoldPlan plan = plan_folds(speakers, 10, 3);
    std::vector<int> sizes(10, 0);
    for (const auto& [id, fold] : plan.assignment) {
        REQUIRE(fold >= 0);
        REQUIRE(fold < 10);
        ++sizes[static_cast<std::size_t>(fold)];
    }
    CHECK(plan.assignment.size() == 267);
    for (int s : sizes) CHECK((s == 26 || s == 27));
}

TEST_CASE("fold planning is deterministic and session-weighted") {
    std::vector<std::pair<std::string, ClassLabel>> speakers;
    for (int i = 0; i < 40; ++i) {
        const std::string id = "s" + std::to_string(i);
        const int sessions = 1 + i % 3;
        for (int n = 0; n < sessions; ++n)
            speakers.emplace_back(id, i % 2 == 0 ? ClassLabel::D : ClassLabel::H);
    }
    const FoldPlan a = plan_folds(speakers, 10, 5);
    const FoldPlan b = plan_folds(speakers, 10, 5);
    CHECK(a.assignment == b.assignment);

    // Every speaker lands in exactly one fold by construction; session
    // totals should be near-balanced.
    std::vector<int> fold_sessions(10, 0);
    for (const auto& [id, label] : speakers)
        ++fold_sessions[static_cast<std::size_t>(a.assignment.at(id))];
    const auto [lo, hi] = std::minmax_element(fold_sessions.begin(), fold_sessions.end());
    CHECK(*hi - *lo <= 2);

    CHECK_THROWS_AS(plan_folds({{"one", ClassLabel::D}}, 10, 0), EmptyInputError);
}
