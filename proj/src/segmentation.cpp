#include "hodcnn/segmentation.hpp"

#include "hodcnn/error.hpp"
#include "hodcnn/woa.hpp"

#include <algorithm>
#include <cmath>

namespace hodcnn {

void ThresholdSet::validate() const {
    require(!levels.empty(), ErrorKind::invalid_argument, "threshold set is empty");
    int prev = 0;
    for (int t : levels) {
        require(t >= 1 && t <= 255, ErrorKind::invalid_argument,
                "threshold level out of range 1..255");
        require(t > prev, ErrorKind::invalid_argument, "threshold levels must strictly increase");
        prev = t;
    }
}

namespace {

// Prefix sums over the normalized histogram: prob[i] = sum of g_j for
// j < i, plogp[i] = sum of g_j ln g_j (0 ln 0 := 0). Class entropies are
// evaluated from these by class_entropy, so every search path computes
// bit-identical objectives.
struct EntropyTable {
    std::array<double, 257> prob{};
    std::array<double, 257> plogp{};
};

EntropyTable build_table(const Histogram& hist) {
    require(hist.total > 0, ErrorKind::empty_input, "histogram has no mass");
    EntropyTable t;
    double total = static_cast<double>(hist.total);
    for (int i = 0; i < 256; ++i) {
        double g = static_cast<double>(hist.bins[static_cast<std::size_t>(i)]) / total;
        t.prob[i + 1] = t.prob[i] + g;
        t.plogp[i + 1] = t.plogp[i] + (g > 0.0 ? g * std::log(g) : 0.0);
    }
    return t;
}

// Shannon entropy of the class spanning gray levels [lo, hi).
double class_entropy(const EntropyTable& t, int lo, int hi) {
    double p = t.prob[hi] - t.prob[lo];
    if (p <= 0.0) return 0.0;
    return -(t.plogp[hi] - t.plogp[lo]) / p + std::log(p);
}

double objective_from_table(const EntropyTable& t, const std::vector<int>& levels) {
    double sum = 0.0;
    int lo = 0;
    for (int level : levels) {
        sum += class_entropy(t, lo, level);
        lo = level;
    }
    sum += class_entropy(t, lo, 256);
    return sum;
}

// Lexicographic enumeration of strictly increasing tuples; first strict
// improvement wins, which realizes the smallest-tuple tie-break.
void enumerate(const EntropyTable& t, std::vector<int>& tuple, std::size_t pos, int next_min,
               int levels, ThresholdResult& best, bool& any) {
    if (pos == static_cast<std::size_t>(levels)) {
        double value = objective_from_table(t, tuple);
        if (!any || value > best.objective) {
            any = true;
            best.objective = value;
            best.thresholds.levels = tuple;
        }
        return;
    }
    int remaining = levels - static_cast<int>(pos) - 1;
    for (int v = next_min; v <= 255 - remaining; ++v) {
        tuple[pos] = v;
        enumerate(t, tuple, pos + 1, v + 1, levels, best, any);
    }
}

ThresholdResult exhaustive_search(const EntropyTable& t, int levels) {
    ThresholdResult best;
    std::vector<int> tuple(static_cast<std::size_t>(levels));
    bool any = false;
    enumerate(t, tuple, 0, 1, levels, best, any);
    return best;
}

ThresholdResult woa_search(const EntropyTable& t, int levels,
                           const ThresholdSearchOptions& options) {
    SearchSpace space = SearchSpace::box(static_cast<std::size_t>(levels), 1.0, 255.0);
    WoaConfig config;
    config.population_size = options.population;
    config.max_iterations = options.iterations;
    config.seed = options.seed;

    // Minimize the negated entropy of the repaired integer tuple.
    auto objective = [&](const std::vector<double>& position) {
        ThresholdSet set = repair_thresholds(position);
        return -objective_from_table(t, set.levels);
    };
    OptResult opt = optimize(objective, space, config);

    ThresholdResult result;
    result.thresholds = repair_thresholds(opt.best_position);
    result.objective = -opt.best_fitness;
    return result;
}

} // namespace

double entropy_objective(const Histogram& hist, const ThresholdSet& thresholds) {
    thresholds.validate();
    EntropyTable t = build_table(hist);
    return objective_from_table(t, thresholds.levels);
}

ThresholdResult optimal_thresholds(const Histogram& hist, int levels, ThresholdStrategy strategy,
                                   const ThresholdSearchOptions& options) {
    require(levels >= 1 && levels <= 4, ErrorKind::invalid_argument,
            "threshold count must be in 1..4");
    EntropyTable t = build_table(hist);
    if (strategy == ThresholdStrategy::exhaustive) return exhaustive_search(t, levels);
    return woa_search(t, levels, options);
}

ThresholdSet repair_thresholds(const std::vector<double>& position) {
    require(!position.empty() && position.size() <= 4, ErrorKind::invalid_argument,
            "threshold position must have 1..4 coordinates");
    std::vector<int> v(position.size());
    for (std::size_t i = 0; i < position.size(); ++i) {
        int level = static_cast<int>(std::floor(position[i] + 0.5));
        v[i] = std::clamp(level, 1, 255);
    }
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] <= v[i - 1]) v[i] = v[i - 1] + 1; // bump duplicates upward
    if (v.back() > 255) {
        v.back() = 255; // ran off the top; repair downward
        for (std::size_t i = v.size() - 1; i-- > 0;)
            if (v[i] >= v[i + 1]) v[i] = v[i + 1] - 1;
    }
    ThresholdSet set{v};
    set.validate();
    return set;
}

LabelMap segment(const Image& image, const ThresholdSet& thresholds) {
    image.validate();
    thresholds.validate();
    require(image.channels == 1, ErrorKind::invalid_argument, "segment requires a grayscale image");

    LabelMap map;
    map.width = image.width;
    map.height = image.height;
    map.labels.resize(image.pixel_count());
    for (std::size_t i = 0; i < map.labels.size(); ++i) {
        int level = gray_level(image.pixels[i]);
        int label = 0;
        for (int tlevel : thresholds.levels)
            if (tlevel <= level) ++label;
        map.labels[i] = label;
    }
    return map;
}

} // namespace hodcnn
