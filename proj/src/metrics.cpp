#include "hodcnn/metrics.hpp"

#include "hodcnn/error.hpp"

#include <algorithm>
#include <numeric>

namespace hodcnn {

Metrics Metrics::from_counts(const std::vector<ConfusionCounts>& per_class) {
    require(!per_class.empty(), ErrorKind::empty_input, "no confusion counts");
    Metrics m;
    m.per_class = per_class;
    for (const ConfusionCounts& c : per_class) {
        m.micro.tp += c.tp;
        m.micro.tn += c.tn;
        m.micro.fp += c.fp;
        m.micro.fn += c.fn;
    }
    require(m.micro.total() > 0, ErrorKind::empty_input, "confusion counts are all zero");

    auto rate = [](std::uint64_t num, std::uint64_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = rate(m.micro.tp + m.micro.tn, m.micro.total());
    m.sensitivity = rate(m.micro.tp, m.micro.tp + m.micro.fn);
    m.specificity = rate(m.micro.tn, m.micro.tn + m.micro.fp);
    m.error = 1.0 - m.accuracy;
    return m;
}

Metrics Metrics::from_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                  int num_classes) {
    require(truth.size() == predicted.size(), ErrorKind::shape_mismatch,
            "truth and prediction lengths differ");
    require(!truth.empty(), ErrorKind::empty_input, "no predictions to score");
    std::vector<ConfusionCounts> per_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        for (int c = 0; c < num_classes; ++c) {
            bool is_truth = truth[i] == c;
            bool is_pred = predicted[i] == c;
            ConfusionCounts& cc = per_class[static_cast<std::size_t>(c)];
            if (is_truth && is_pred) cc.tp++;
            else if (is_truth && !is_pred) cc.fn++;
            else if (!is_truth && is_pred) cc.fp++;
            else cc.tn++;
        }
    }
    return from_counts(per_class);
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& positive) {
    require(scores.size() == positive.size(), ErrorKind::shape_mismatch,
            "scores and labels differ in length");
    std::uint64_t n_pos = 0, n_neg = 0;
    for (bool p : positive) (p ? n_pos : n_neg)++;
    require(n_pos > 0 && n_neg > 0, ErrorKind::invalid_argument,
            "ROC needs at least one positive and one negative sample");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    std::uint64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        // Sweep past every sample sharing this score: one point per
        // distinct threshold.
        double score = scores[order[i]];
        while (i < order.size() && scores[order[i]] == score) {
            if (positive[order[i]]) ++tp;
            else ++fp;
            ++i;
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                                static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    curve.auc = trapezoid_auc(curve.points);
    return curve;
}

double trapezoid_auc(const std::vector<RocPoint>& points) {
    double auc = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        auc += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
    return auc;
}

} // namespace hodcnn
