#ifndef HODCNN_WOA_HPP
#define HODCNN_WOA_HPP

#include "hodcnn/rng.hpp"

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

namespace hodcnn {

struct ContinuousDim {
    double lo = 0.0;
    double hi = 1.0;
};

/// Ordered value list; the position coordinate lives in [0, count-1] and
/// decode() rounds it (half-up) to an index.
struct CategoricalDim {
    std::vector<double> values;
};

/// Bounded mixed discrete/continuous search space.
struct SearchSpace {
    std::vector<std::variant<ContinuousDim, CategoricalDim>> dims;

    std::size_t size() const { return dims.size(); }
    double lo(std::size_t d) const;
    double hi(std::size_t d) const;
    double clamp(std::size_t d, double v) const;

    void validate() const;

    static SearchSpace box(std::size_t dims, double lo, double hi);
};

struct Whale {
    std::vector<double> position;
    double fitness = 0.0;
    bool evaluated = false;
};

struct WoaConfig {
    int population_size = 30;
    int max_iterations = 200;
    double spiral_constant = 1.0;
    std::uint64_t seed = 0;
};

struct TracePoint {
    int iteration = 0;       // 0 = after initial evaluation
    double best_fitness = 0; // best-so-far, non-increasing
    double mean_fitness = 0; // mean over the current population
};

struct OptResult {
    std::vector<double> best_position;
    double best_fitness = 0.0;
    std::vector<TracePoint> trace;
    std::uint64_t evaluations = 0;
};

/// population_size whales drawn uniformly within bounds from rng.
std::vector<Whale> init_population(const SearchSpace& space, const WoaConfig& config, Rng& rng);

/// Convenience overload: fresh generator seeded from config.seed.
std::vector<Whale> init_population(const SearchSpace& space, const WoaConfig& config);

/// Continuous coordinates pass through; categorical coordinates map to
/// round-half-up(coordinate) clamped into the value list.
std::vector<double> decode(const std::vector<double>& position, const SearchSpace& space);

/// Index form of decode for one categorical dimension.
std::size_t decode_index(double coordinate, const CategoricalDim& dim);

/// One position-update round of the whale dynamics. `best` is the current
/// best (lowest-fitness) whale; iteration runs 1..config.max_iterations and
/// sets the contraction coefficient k = 2 (1 - iteration / max_iterations),
/// which reaches exactly 0 on the final round. Fitness values are left
/// stale; callers re-evaluate afterwards.
///
/// Draw order, fixed for reproducibility: whales in index order; per whale
/// first the branch draws, then the coefficient draws:
///   1. i ~ U(0,1)                     spiral when i >= 0.5
///   2. spiral:      h ~ U(-1,1), then per-dim update
///                   q_d <- |best_d - q_d| * e^(p h) cos(2 pi h) + best_d
///      otherwise:   peer index r ~ below(n) (drawn even if unused), then
///                   per-dim s ~ U(0,1) with F = 2 s, H = 2 k s - k;
///                   |H| < 1: q_d <- best_d - H * |F * best_d - q_d|
///                   |H| >= 1: q_d <- peer_d - H * |F * peer_d - q_d|
///      (the peer is whale r of the in-place population, so it may already
///      have moved this round)
/// All coordinates are clamped to the space bounds afterwards.
void woa_step(std::vector<Whale>& whales, const Whale& best, int iteration,
              const SearchSpace& space, const WoaConfig& config, Rng& rng);

/// Full run: evaluate the initial population, then max_iterations rounds of
/// woa_step + re-evaluation, tracking the best position ever evaluated.
/// Deterministic given config.seed and a deterministic objective; evaluation
/// count is exactly population_size * (max_iterations + 1). Throws
/// Error{non_finite} naming the offending position if the objective returns
/// a non-finite value.
OptResult optimize(const std::function<double(const std::vector<double>&)>& objective,
                   const SearchSpace& space, const WoaConfig& config);

/// Writes the convergence trace as CSV: header iteration,best_fitness,mean_fitness.
void write_trace_csv(const OptResult& result, const std::string& path);

} // namespace hodcnn

#endif
