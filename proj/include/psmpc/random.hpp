#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "psmpc/model.hpp"

namespace psmpc {

/// SplitMix64 step; used to decorrelate per-run seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for run `run_index` of a batch with the given master seed.
inline std::uint64_t derive_run_seed(std::uint64_t master, std::uint64_t run_index) {
    return splitmix64(master ^ splitmix64(run_index + 1));
}

/// Deterministic uniform stream. mt19937_64 output is pinned by the standard
/// and the double conversion below is explicit, so sequences are identical
/// across platforms and thread counts.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform index in [0, n).
    std::size_t sample_uniform_index(std::size_t n) {
        const auto i = static_cast<std::size_t>(next_unit() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    /// Inverse-CDF sample over a probability row, accumulating in index
    /// order. Falls back to the last positive entry when rounding pushes the
    /// draw past the accumulated total.
    std::size_t sample_index(std::span<const double> probs) {
        const double u = next_unit();
        double cum = 0.0;
        std::size_t last_positive = 0;
        bool seen_positive = false;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] > 0.0) {
                last_positive = i;
                seen_positive = true;
            }
            cum += probs[i];
            if (u < cum)
                return i;
        }
        return seen_positive ? last_positive : probs.size() - 1;
    }

  private:
    std::mt19937_64 engine_;
};

/// Uniform sampling from the probability simplex (Dirichlet(1,...,1)) via
/// normalized exponentials from an explicit stream.
class SimplexSampler {
  public:
    SimplexSampler(std::size_t dim, std::uint64_t seed) : dim_(dim), stream_(seed) {}

    Belief next() {
        std::vector<double> w(dim_);
        double sum = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            w[i] = -std::log(1.0 - stream_.next_unit());
            sum += w[i];
        }
        if (sum <= 0.0)
            return Belief::uniform(dim_);
        return Belief(std::move(w));
    }

  private:
    std::size_t dim_;
    RandomStream stream_;
};

} // namespace psmpc
