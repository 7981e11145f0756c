#pragma once

#include <cstdint>
#include <vector>

#include "scopf/grid.hpp"

namespace scopf {

// Forward rules with matching vector-Jacobian products for the three stages
// of the primal pipeline: bound map -> repair -> binary search. Every backward
// pass consumes the flags saved by its forward pass and never re-derives them.

double sigmoid(double z);

/// g = glb + sigmoid(z) (gub - glb). `sig` receives sigmoid(z) for the backward pass.
VectorXd bound_map(const VectorXd& z, const VectorXd& glb, const VectorXd& gub, VectorXd* sig = nullptr);
VectorXd bound_map_vjp(const VectorXd& sig, const VectorXd& glb, const VectorXd& gub, const VectorXd& grad_out);

enum class RepairBranch : std::uint8_t {
    Identity,   // 1'g already equals the demand
    Deficit,    // scaled towards gub
    Surplus,    // scaled towards glb
    Saturated,  // deficit with 1'g == 1'gub: the output is gub
};

struct RepairTape {
    RepairBranch branch = RepairBranch::Identity;
    double zeta = 0.0;
    double sum_in = 0.0;
    double sum_bound = 0.0;  // 1'gub (deficit) or 1'glb (surplus)
    VectorXd g_in;
};

/// Proportional power-balance repair. Requires 1'glb <= d_total <= 1'gub.
VectorXd repair_layer(const VectorXd& g_check, double d_total, const VectorXd& glb, const VectorXd& gub,
                      RepairTape* tape = nullptr);
VectorXd repair_layer_vjp(const RepairTape& tape, double d_total, const VectorXd& glb, const VectorXd& gub,
                          const VectorXd& grad_out);

struct BinarySearchResult {
    VectorXd gk;
    double n = 0.0;
    std::vector<std::uint8_t> capped;
    double residual = 0.0;  // 1'gk - d_total
};

inline constexpr int kDefaultBisectionIterations = 25;

/// Bisection on the global APR signal n in [0, 1] for generator outage `k`,
/// `iterations` trials. Returns the trial with the smallest |residual|; an
/// exact zero stops the search early.
BinarySearchResult binary_search_layer(const VectorXd& g, double d_total, int k, const VectorXd& droop,
                                       const VectorXd& gub, int iterations = kDefaultBisectionIterations);

/// d gk_i / d g_j = [i == j] (1 - capped_i) for i != k, zero for i == k; n is held constant.
VectorXd binary_search_vjp(const BinarySearchResult& result, int k, const VectorXd& grad_gk);

/// Everything the pipeline backward pass needs from one forward evaluation.
struct LayerTape {
    VectorXd sig;
    RepairTape repair;
    std::vector<BinarySearchResult> searches;  // one per generator contingency
};

}  // namespace scopf
