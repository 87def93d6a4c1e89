#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace semaug {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

/// Seeded generator with platform-independent uniform draws. The standard
/// distributions are implementation-defined, so they are avoided wherever a
/// value ends up in an output file.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    Rng(std::uint64_t seed, std::string_view stream) : engine_(mix(seed, stream)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double prob) { return uniform() < prob; }

    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    template <typename Vec>
    const auto& pick(const Vec& v) {
        return v[below(v.size())];
    }

private:
    static std::uint64_t mix(std::uint64_t seed, std::string_view stream) {
        // FNV-1a over the stream name, folded into the seed with splitmix64.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : stream) {
            h = (h ^ c) * 0x100000001b3ULL;
        }
        std::uint64_t z = seed ^ h;
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

/// Fill with uniform draws in [-scale, scale].
inline void fill_uniform(Matrix& m, Rng& rng, double scale) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.uniform(-scale, scale);
    }
}

}  // namespace semaug
