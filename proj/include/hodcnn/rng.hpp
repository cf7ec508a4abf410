#ifndef HODCNN_RNG_HPP
#define HODCNN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace hodcnn {

/// Deterministic random source shared by every seeded component.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard, and all derived draws below are defined arithmetically
/// on top of next_u64(). An alternate implementation that reproduces
/// this contract reproduces every trace in the project bit for bit:
///
///   uniform()        = (next_u64() >> 11) * 2^-53            in [0, 1)
///   uniform(lo, hi)  = lo + (hi - lo) * uniform()
///   below(n)         = min(n - 1, floor(uniform() * n))
///   normal()         = sqrt(-2 ln(1 - u1)) * cos(2 pi u2),
///                      u1 = uniform(), u2 = uniform()        (2 draws)
///
/// Consumers document their own draw order next to the code that draws
/// (e.g. woa.hpp for the optimizer stream, micronet.cpp for weight init).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Uniform integer in [0, n). n must be >= 1.
    std::size_t below(std::size_t n) {
        auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return k >= n ? n - 1 : k;
    }

    /// One standard normal deviate; always consumes exactly two uniforms.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent child seeds from a
/// base seed plus a tag without correlating the streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace hodcnn

#endif
