#pragma once

// Deterministic random streams with serializable state.
//
// Every source of randomness in a run flows through an explicit Rng so that
// (config, seed) -> identical artifacts, and so a killed run can resume
// mid-stream. Draws are constructed here from raw 64-bit engine outputs
// instead of std::*_distribution, whose algorithms are implementation-defined
// and would silently break byte-level reproducibility across toolchains.

#include <cstdint>
#include <iosfwd>
#include <random>

namespace ganlab {

class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Standard normal via Box-Muller. Deliberately discards the second
    // sample of the pair: caching it would add hidden state beyond the
    // engine and complicate save/load.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

    // Uniform integer in [0, n). Rejection sampling: exact uniformity and
    // fully determined by the engine stream.
    int below(int n) {
        auto span = static_cast<std::uint64_t>(n);
        std::uint64_t limit = (~std::uint64_t{0} / span) * span;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return static_cast<int>(r % span);
    }

    // mt19937_64 state serializes as text per the standard; that is what
    // checkpoint files store.
    void save(std::ostream& os) const;
    void load(std::istream& is);

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace ganlab
