#ifndef CPOLAB_RNG_HPP
#define CPOLAB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cpolab {

// Seeded generator with hand-specified draw mappings. std::mt19937_64 output
// is pinned by the standard, but the distribution classes are not, so every
// float/int/shuffle mapping is spelled out here to keep runs bitwise
// reproducible across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0,1); never returns 0 so log() stays finite.
    double uniform01_open() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller, one value per call (the spare is dropped to keep the
    // consumption pattern simple and deterministic).
    double gaussian() {
        const double u = uniform01_open();
        const double v = uniform01_open();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
    }

    double gumbel() { return -std::log(-std::log(uniform01_open())); }

    // Fisher-Yates with the rejection sampler above.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<int> permutation(int n) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        shuffle(idx);
        return idx;
    }

    // Derives an independent stream; distinct labels give distinct streams.
    Rng fork(std::uint64_t label) {
        return Rng(engine_() ^ (label * 0x9e3779b97f4a7c15ULL));
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace cpolab

#endif
