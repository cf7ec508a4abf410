#ifndef HODCNN_METRICS_HPP
#define HODCNN_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace hodcnn {

struct ConfusionCounts {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }
};

/// Quality scores from one-vs-rest confusion counts. The headline rates
/// are computed on the micro-averaged (summed) counts:
///   accuracy    = (TP + TN) / (TP + TN + FP + FN)
///   sensitivity = TP / (TP + FN)
///   specificity = TN / (TN + FP)
///   error       = 1 - accuracy
struct Metrics {
    std::vector<ConfusionCounts> per_class;
    ConfusionCounts micro;
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double error = 0.0;
    double wall_time_seconds = 0.0;

    static Metrics from_counts(const std::vector<ConfusionCounts>& per_class);
    static Metrics from_predictions(const std::vector<int>& truth,
                                    const std::vector<int>& predicted, int num_classes);
};

struct RocPoint {
    double fpr = 0.0, tpr = 0.0;
};

/// (FPR, TPR) sweep over score thresholds, sorted by FPR from (0,0) to
/// (1,1), with the trapezoidal AUC.
struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// Builds the curve for one positive class: samples with higher scores are
/// predicted positive first. Equal scores are grouped, so uninformative
/// (all-equal) scores give the diagonal and AUC 0.5. Requires at least one
/// positive and one negative sample.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& positive);

double trapezoid_auc(const std::vector<RocPoint>& points);

} // namespace hodcnn

#endif
