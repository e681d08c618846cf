#ifndef MINICAR_SIM_RNG_HPP
#define MINICAR_SIM_RNG_HPP

#include <cstdint>
#include <optional>
#include <random>

namespace minicar::sim {

/// Portable noise source. The engine is std::mt19937_64, whose output sequence
/// is fixed by the standard; the distributions are written out here because the
/// standard library ones are implementation defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) built from the top 53 bits of one draw.
    double uniform();
    /// Standard normal via the Box-Muller transform.
    double gaussian();
    double gaussian(double sigma) { return sigma > 0.0 ? sigma * gaussian() : 0.0; }
    bool bernoulli(double p);

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

}  // namespace minicar::sim

#endif  // MINICAR_SIM_RNG_HPP
