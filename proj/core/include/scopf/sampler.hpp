#pragma once

#include <cstdint>
#include <random>

#include "scopf/grid.hpp"

namespace scopf {

using Rng = std::mt19937_64;

struct PerturbationConfig {
    double mu = 0.5;           // maximum relative load deviation
    double load_corr = 0.5;    // off-diagonal correlation between load units
    double factor_corr = 0.8;  // off-diagonal correlation of cost / upper-bound factors
    std::uint64_t seed = 0;
    double z95 = 1.645;  // sigma_i = mu * d0_i / z95

    void validate() const;
};

/// One sampled problem. `x` is the normalized network input of length
/// 2|G| + |L|, laid out as [d / d0, c / c0, gub / gub0].
struct Instance {
    VectorXd d;    // per load unit
    VectorXd c;    // per generator
    VectorXd gub;  // per generator
    VectorXd x;
    std::uint64_t seed = 0;
};

/// Truncated correlated Gaussian load draw on the box [(1-mu) d0, (1+mu) d0].
/// Rejects up to 100 times, then clamps.
VectorXd sample_loads(const GridCase& grid, const PerturbationConfig& config, Rng& rng);

/// One draw from N(1, Sigma), Sigma_ij = sigma^2 (corr + (1 - corr) [i == j]), sigma = mu / z95.
VectorXd sample_factors(int n, double corr, const PerturbationConfig& config, Rng& rng);

/// Deterministic part of instance construction: applies cost / bound factors
/// with the nonnegativity and lower-bound safeguards and builds x.
Instance assemble_instance(const GridCase& grid, VectorXd d, const VectorXd& cost_factor,
                           const VectorXd& bound_factor);

VectorXd input_vector(const GridCase& grid, const VectorXd& d, const VectorXd& c, const VectorXd& gub);

/// Samples a single instance (no feasibility resampling).
Instance make_instance(const GridCase& grid, const PerturbationConfig& config, Rng& rng);

/// True when 1'glb <= 1'd <= 1'gub.
bool has_capacity_headroom(const GridCase& grid, const Instance& inst);

/// Per-instance seed derived from the stream seed; stable across runs.
std::uint64_t instance_seed(std::uint64_t stream_seed, std::uint64_t index);

struct SampleStats {
    std::uint64_t resamples = 0;
};

/// Draws the i-th instance of a stream, resampling (with a fresh derived seed)
/// until the total-capacity headroom condition holds.
Instance sample_feasible_instance(const GridCase& grid, const PerturbationConfig& config, std::uint64_t index,
                                  SampleStats* stats = nullptr);

}  // namespace scopf
