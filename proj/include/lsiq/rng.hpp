#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace lsiq {

/// splitmix64 step; used to derive substream seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of the `stream_id`-th independent substream of `root`.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream_id) {
    std::uint64_t state = root ^ (0xa076'1d64'78bd'642fULL * (stream_id + 1));
    std::uint64_t s = splitmix64(state);
    return splitmix64(state) ^ s;
}

/// Deterministic random stream.
///
/// Sampling helpers avoid the standard <random> distributions, whose output
/// sequences are implementation-defined; everything here is bit-reproducible
/// for a fixed seed across platforms and standard libraries.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in {0, ..., n-1}.
    int uniform_int(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }

    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(engine_() % static_cast<std::uint64_t>(n));
    }

    /// Inverse-CDF sample from an (unnormalized is fine) weight vector.
    int categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        // Fall through on floating-point shortfall: last positive-weight bucket.
        for (std::size_t i = weights.size(); i-- > 0;)
            if (weights[i] > 0.0) return static_cast<int>(i);
        return static_cast<int>(weights.size()) - 1;
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace lsiq
