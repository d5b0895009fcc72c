#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <vector>

#include "eeo/errors.hpp"

namespace eeo {

// Identifier of the generator scheme; recorded in run metadata so an output
// directory is self-describing about how its randomness was produced.
inline constexpr const char* kGeneratorId = "splitmix64/box-muller/v1";

// Named substreams. Every random draw in the library is keyed by
// (seed, stream id, step), so mechanisms can be toggled on and off without
// shifting each other's draws.
namespace stream {
inline constexpr std::uint64_t kInit = 1;      // parameter initialization
inline constexpr std::uint64_t kBatch = 2;     // minibatch selection
inline constexpr std::uint64_t kSgld = 3;      // Langevin noise
inline constexpr std::uint64_t kProbe = 4;     // curvature probe start vectors
inline constexpr std::uint64_t kData = 5;      // synthetic data generation
inline constexpr std::uint64_t kTeacher = 6;   // hidden attention-target weights
inline constexpr std::uint64_t kRobust = 7;    // robust-objective sample directions
inline constexpr std::uint64_t kLandscape = 8; // landscape construction (X, noise, ...)
inline constexpr std::uint64_t kStart = 9;     // starting-point draws
}  // namespace stream

namespace detail {
// splitmix64 output function (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64_next(s);
    s = h ^ (b + 0x9E3779B97F4A7C15ULL);
    return splitmix64_next(s);
}
}  // namespace detail

// Derive the 64-bit key of the (seed, stream, step) substream.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t step) {
    return detail::mix(detail::mix(seed, stream_id), step);
}

// Small counter-based PRNG: a splitmix64 sequence starting at a derived key,
// with Box-Muller on top for Gaussians. Value type; copying forks the stream.
class Rng {
public:
    explicit Rng(std::uint64_t key) : state_(key) {}

    static Rng stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t step) {
        return Rng(stream_key(seed, stream_id, step));
    }

    std::uint64_t next_u64() { return detail::splitmix64_next(state_); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; pairs are cached.
    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // 1 - u lies in (0, 1], keeping the log argument positive.
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::vector<double> gauss_vector(std::size_t n) {
        std::vector<double> out(n);
        for (auto& x : out) x = gauss();
        return out;
    }

    // Uniform direction on the unit sphere in R^n.
    std::vector<double> unit_vector(std::size_t n) {
        if (n == 0) throw ValidationError("unit_vector: dimension must be positive");
        for (int attempt = 0; attempt < 64; ++attempt) {
            std::vector<double> v = gauss_vector(n);
            double nrm2 = 0.0;
            for (double x : v) nrm2 += x * x;
            if (nrm2 > 0.0) {
                const double inv = 1.0 / std::sqrt(nrm2);
                for (auto& x : v) x *= inv;
                return v;
            }
        }
        throw NumericError("unit_vector: failed to draw a nonzero direction");
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace eeo
