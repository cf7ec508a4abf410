#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hodcnn/error.hpp"
#include "hodcnn/metrics.hpp"
#include "hodcnn/rng.hpp"

#include <cmath>

using namespace hodcnn;

TEST_CASE("confusion arithmetic on a fixed binary matrix") {
    // TP=3 FN=1 TN=4 FP=2 over 10 samples.
    Metrics m = Metrics::from_counts({{3, 4, 2, 1}});
    CHECK(m.sensitivity == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(m.specificity == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(m.accuracy == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(m.error == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("perfect predictions give perfect scores") {
    Metrics m = Metrics::from_predictions({0, 1, 0, 1}, {0, 1, 0, 1}, 2);
    CHECK(m.accuracy == 1.0);
    CHECK(m.error == 0.0);
    CHECK(m.sensitivity == 1.0);
    CHECK(m.specificity == 1.0);
}

TEST_CASE("metric identities hold exactly on random counts") {
    Rng rng(71);
    for (int rep = 0; rep < 500; ++rep) {
        std::size_t n_classes = 1 + rng.below(4);
        std::vector<ConfusionCounts> counts(n_classes);
        for (ConfusionCounts& c : counts) {
            c.tp = rng.below(50);
            c.tn = rng.below(50);
            c.fp = rng.below(50);
            c.fn = rng.below(50);
        }
        std::uint64_t total = 0;
        for (const ConfusionCounts& c : counts) total += c.total();
        if (total == 0) counts[0].tp = 1;

        Metrics m = Metrics::from_counts(counts);
        CHECK(m.error == 1.0 - m.accuracy); // exact, by construction
        double tp = 0, tn = 0, fp = 0, fn = 0;
        for (const ConfusionCounts& c : counts) {
            tp += static_cast<double>(c.tp);
            tn += static_cast<double>(c.tn);
            fp += static_cast<double>(c.fp);
            fn += static_cast<double>(c.fn);
        }
        CHECK(m.accuracy == (tp + tn) / (tp + tn + fp + fn));
        if (tp + fn > 0) CHECK(m.sensitivity == tp / (tp + fn));
        if (tn + fp > 0) CHECK(m.specificity == tn / (tn + fp));
        CHECK(m.accuracy >= 0.0);
        CHECK(m.accuracy <= 1.0);
        CHECK(m.sensitivity >= 0.0);
        CHECK(m.sensitivity <= 1.0);
        CHECK(m.specificity >= 0.0);
        CHECK(m.specificity <= 1.0);
    }
}

TEST_CASE("from_predictions builds one-vs-rest counts per class") {
    // truth:     0 0 1 2
    // predicted: 0 1 1 1
    Metrics m = Metrics::from_predictions({0, 0, 1, 2}, {0, 1, 1, 1}, 3);
    REQUIRE(m.per_class.size() == 3);
    CHECK(m.per_class[0].tp == 1);
    CHECK(m.per_class[0].fn == 1);
    CHECK(m.per_class[0].fp == 0);
    CHECK(m.per_class[0].tn == 2);
    CHECK(m.per_class[1].tp == 1);
    CHECK(m.per_class[1].fp == 2);
    CHECK(m.per_class[2].fn == 1);
    CHECK(m.per_class[2].tp == 0);
}

TEST_CASE("roc endpoints, ordering and trapezoid identity") {
    Rng rng(73);
    for (int rep = 0; rep < 20; ++rep) {
        std::size_t n = 20 + rng.below(60);
        std::vector<double> scores(n);
        std::vector<bool> positive(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = rng.uniform();
            positive[i] = rng.below(2) == 1;
        }
        positive[0] = true;
        positive[1] = false;

        RocCurve curve = roc_curve(scores, positive);
        CHECK(curve.points.front().fpr == 0.0);
        CHECK(curve.points.front().tpr == 0.0);
        CHECK(curve.points.back().fpr == 1.0);
        CHECK(curve.points.back().tpr == 1.0);
        for (std::size_t i = 1; i < curve.points.size(); ++i)
            CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
        CHECK(std::abs(curve.auc - trapezoid_auc(curve.points)) <= 1e-12);
        CHECK(curve.auc >= 0.0);
        CHECK(curve.auc <= 1.0);
    }
}

TEST_CASE("roc of perfectly separated scores has AUC 1") {
    std::vector<double> scores = {0.9, 0.8, 0.85, 0.2, 0.1, 0.15};
    std::vector<bool> positive = {true, true, true, false, false, false};
    RocCurve curve = roc_curve(scores, positive);
    CHECK(curve.auc == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("roc of constant scores is the diagonal") {
    std::vector<double> scores(10, 0.5);
    std::vector<bool> positive = {true, false, true, false, true, false, true, false, true, false};
    RocCurve curve = roc_curve(scores, positive);
    REQUIRE(curve.points.size() == 2);
    CHECK(curve.auc == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("roc of random scores is near the diagonal") {
    Rng rng(79);
    std::size_t n = 400;
    std::vector<double> scores(n);
    std::vector<bool> positive(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform();
        positive[i] = rng.below(2) == 1;
    }
    positive[0] = true;
    positive[1] = false;
    RocCurve curve = roc_curve(scores, positive);
    CHECK(std::abs(curve.auc - 0.5) <= 0.05);
}

TEST_CASE("roc requires both classes") {
    CHECK_THROWS_AS(roc_curve({0.1, 0.2}, {true, true}), Error);
    CHECK_THROWS_AS(roc_curve({0.1, 0.2}, {false, false}), Error);
    CHECK_THROWS_AS(roc_curve({0.1}, {true, false}), Error);
}
