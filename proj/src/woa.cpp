#include "hodcnn/woa.hpp"

#include "hodcnn/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace hodcnn {

double SearchSpace::lo(std::size_t d) const {
    if (const auto* c = std::get_if<ContinuousDim>(&dims[d])) return c->lo;
    return 0.0;
}

double SearchSpace::hi(std::size_t d) const {
    if (const auto* c = std::get_if<ContinuousDim>(&dims[d])) return c->hi;
    return static_cast<double>(std::get<CategoricalDim>(dims[d]).values.size() - 1);
}

double SearchSpace::clamp(std::size_t d, double v) const {
    double a = lo(d), b = hi(d);
    if (v < a) return a;
    if (v > b) return b;
    return v;
}

void SearchSpace::validate() const {
    require(!dims.empty(), ErrorKind::invalid_argument, "search space has no dimensions");
    for (std::size_t d = 0; d < dims.size(); ++d) {
        if (const auto* c = std::get_if<ContinuousDim>(&dims[d])) {
            require(c->lo < c->hi, ErrorKind::invalid_argument,
                    "continuous dim " + std::to_string(d) + " needs lo < hi");
        } else {
            // A single value is allowed: it pins the coordinate.
            require(!std::get<CategoricalDim>(dims[d]).values.empty(),
                    ErrorKind::invalid_argument,
                    "categorical dim " + std::to_string(d) + " needs at least 1 value");
        }
    }
}

SearchSpace SearchSpace::box(std::size_t dims, double lo, double hi) {
    SearchSpace s;
    s.dims.assign(dims, ContinuousDim{lo, hi});
    s.validate();
    return s;
}

std::vector<Whale> init_population(const SearchSpace& space, const WoaConfig& config, Rng& rng) {
    space.validate();
    require(config.population_size >= 2, ErrorKind::invalid_argument,
            "population size must be >= 2");
    std::vector<Whale> whales(static_cast<std::size_t>(config.population_size));
    for (Whale& w : whales) {
        w.position.resize(space.size());
        for (std::size_t d = 0; d < space.size(); ++d)
            w.position[d] = rng.uniform(space.lo(d), space.hi(d));
    }
    return whales;
}

std::vector<Whale> init_population(const SearchSpace& space, const WoaConfig& config) {
    Rng rng(config.seed);
    return init_population(space, config, rng);
}

std::size_t decode_index(double coordinate, const CategoricalDim& dim) {
    double r = std::floor(coordinate + 0.5); // half rounds up
    if (r < 0.0) r = 0.0;
    double top = static_cast<double>(dim.values.size() - 1);
    if (r > top) r = top;
    return static_cast<std::size_t>(r);
}

std::vector<double> decode(const std::vector<double>& position, const SearchSpace& space) {
    require(position.size() == space.size(), ErrorKind::shape_mismatch,
            "position length does not match search space");
    std::vector<double> out(position.size());
    for (std::size_t d = 0; d < position.size(); ++d) {
        if (const auto* cat = std::get_if<CategoricalDim>(&space.dims[d]))
            out[d] = cat->values[decode_index(position[d], *cat)];
        else
            out[d] = position[d];
    }
    return out;
}

void woa_step(std::vector<Whale>& whales, const Whale& best, int iteration,
              const SearchSpace& space, const WoaConfig& config, Rng& rng) {
    require(!whales.empty(), ErrorKind::empty_input, "empty population");
    require(config.max_iterations >= 1, ErrorKind::invalid_argument, "max_iterations must be >= 1");

    double k = 2.0 * (1.0 - static_cast<double>(iteration) / config.max_iterations);
    std::size_t ndim = space.size();
    constexpr double two_pi = 2.0 * 3.14159265358979323846;

    for (Whale& w : whales) {
        double branch = rng.uniform();
        if (branch >= 0.5) {
            // Helix move toward the best position.
            double h = rng.uniform(-1.0, 1.0);
            double shape = std::exp(config.spiral_constant * h) * std::cos(two_pi * h);
            for (std::size_t d = 0; d < ndim; ++d) {
                double dist = std::abs(best.position[d] - w.position[d]);
                w.position[d] = dist * shape + best.position[d];
            }
        } else {
            std::size_t peer = rng.below(whales.size());
            const std::vector<double>& peer_pos = whales[peer].position;
            for (std::size_t d = 0; d < ndim; ++d) {
                double s = rng.uniform();
                double f = 2.0 * s;
                double h_coef = 2.0 * k * s - k;
                if (std::abs(h_coef) < 1.0) {
                    double e = std::abs(f * best.position[d] - w.position[d]);
                    w.position[d] = best.position[d] - h_coef * e;
                } else {
                    double e = std::abs(f * peer_pos[d] - w.position[d]);
                    w.position[d] = peer_pos[d] - h_coef * e;
                }
            }
        }
        for (std::size_t d = 0; d < ndim; ++d)
            w.position[d] = space.clamp(d, w.position[d]);
        w.evaluated = false;
    }
}

namespace {

std::string position_to_string(const std::vector<double>& p) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
    os << "]";
    return os.str();
}

} // namespace

OptResult optimize(const std::function<double(const std::vector<double>&)>& objective,
                   const SearchSpace& space, const WoaConfig& config) {
    Rng rng(config.seed);
    std::vector<Whale> whales = init_population(space, config, rng);

    OptResult result;
    result.best_fitness = std::numeric_limits<double>::infinity();

    auto evaluate_all = [&](int iteration) {
        double sum = 0.0;
        for (Whale& w : whales) {
            w.fitness = objective(w.position);
            w.evaluated = true;
            result.evaluations++;
            if (!std::isfinite(w.fitness))
                fail(ErrorKind::non_finite,
                     "objective returned non-finite value at " + position_to_string(w.position));
            if (w.fitness < result.best_fitness) {
                result.best_fitness = w.fitness;
                result.best_position = w.position;
            }
            sum += w.fitness;
        }
        result.trace.push_back(
            {iteration, result.best_fitness, sum / static_cast<double>(whales.size())});
    };

    evaluate_all(0);
    Whale leader{result.best_position, result.best_fitness, true};
    for (int ju = 1; ju <= config.max_iterations; ++ju) {
        woa_step(whales, leader, ju, space, config, rng);
        evaluate_all(ju);
        leader.position = result.best_position;
        leader.fitness = result.best_fitness;
    }
    return result;
}

void write_trace_csv(const OptResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path);
    out << "iteration,best_fitness,mean_fitness\n";
    char line[128];
    for (const TracePoint& t : result.trace) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", t.iteration, t.best_fitness,
                      t.mean_fitness);
        out << line;
    }
}

} // namespace hodcnn
