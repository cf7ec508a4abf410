#ifndef HODCNN_SEGMENTATION_HPP
#define HODCNN_SEGMENTATION_HPP

#include "hodcnn/image.hpp"

#include <cstdint>
#include <vector>

namespace hodcnn {

/// Strictly increasing threshold levels t_1 < ... < t_L, each in 1..255.
struct ThresholdSet {
    std::vector<int> levels;

    void validate() const;
};

struct ThresholdResult {
    ThresholdSet thresholds;
    double objective = 0.0;
};

enum class ThresholdStrategy { exhaustive, woa };

/// Budget for the woa strategy; ignored by exhaustive search.
struct ThresholdSearchOptions {
    int population = 30;
    int iterations = 80;
    std::uint64_t seed = 0;
};

/// Total Shannon entropy of the threshold classes: class c spans gray
/// levels [t_c, t_{c+1}) with t_0 = 0 and t_{L+1} = 256, and contributes
/// -sum_i (g_i/P_c) ln(g_i/P_c) over its normalized distribution. Empty
/// classes and zero-probability levels contribute 0. Maximized over T by
/// optimal_thresholds.
double entropy_objective(const Histogram& hist, const ThresholdSet& thresholds);

/// Exhaustive strategy enumerates every strictly increasing L-tuple in
/// 1..255 in lexicographic order and keeps the first maximum, so ties
/// break toward the lexicographically smallest tuple. The woa strategy
/// searches the integer-rounded threshold space and returns the best
/// tuple it ever evaluated. L must be in 1..4.
ThresholdResult optimal_thresholds(const Histogram& hist, int levels, ThresholdStrategy strategy,
                                   const ThresholdSearchOptions& options = {});

/// Label = number of thresholds <= quantized level, i.e. the index of the
/// contiguous band [0,255] the pixel falls in.
LabelMap segment(const Image& image, const ThresholdSet& thresholds);

/// Rounds a continuous position to a valid ThresholdSet: nearest-integer,
/// sorted, duplicates bumped to the next free level (downward repair at
/// the 255 ceiling). Used by the woa strategy; exposed for tests.
ThresholdSet repair_thresholds(const std::vector<double>& position);

} // namespace hodcnn

#endif
