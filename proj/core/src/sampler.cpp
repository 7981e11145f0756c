#include "scopf/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "scopf/error.hpp"

namespace scopf {

namespace {

constexpr int kMaxRejections = 100;
constexpr int kMaxFeasibilityResamples = 10000;

// Equicorrelated Gaussian: sigma_i * (sqrt(corr) z0 + sqrt(1 - corr) z_i) has
// covariance sigma_i sigma_j (corr + (1 - corr) [i == j]). Valid for corr = 1.
VectorXd correlated_normal(const VectorXd& sigma, double corr, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double shared = normal(rng);
    const double a = std::sqrt(corr);
    const double b = std::sqrt(1.0 - corr);
    VectorXd out(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) out[i] = sigma[i] * (a * shared + b * normal(rng));
    return out;
}

VectorXd safe_base(const VectorXd& base) {
    return base.unaryExpr([](double v) { return v == 0.0 ? 1.0 : v; });
}

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

void PerturbationConfig::validate() const {
    if (!(mu >= 0 && mu < 1)) throw ConfigError("mu must lie in [0, 1)");
    if (!(load_corr >= 0 && load_corr <= 1)) throw ConfigError("load_corr must lie in [0, 1]");
    if (!(factor_corr >= 0 && factor_corr <= 1)) throw ConfigError("factor_corr must lie in [0, 1]");
    if (!(z95 > 0)) throw ConfigError("z95 must be positive");
}

VectorXd sample_loads(const GridCase& grid, const PerturbationConfig& config, Rng& rng) {
    config.validate();
    const VectorXd& d0 = grid.d0;
    const VectorXd lo = ((1.0 - config.mu) * d0).cwiseMin((1.0 + config.mu) * d0);
    const VectorXd hi = ((1.0 - config.mu) * d0).cwiseMax((1.0 + config.mu) * d0);
    const VectorXd sigma = (config.mu / config.z95) * d0.cwiseAbs();

    VectorXd d;
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
        d = d0 + correlated_normal(sigma, config.load_corr, rng);
        if ((d.array() >= lo.array()).all() && (d.array() <= hi.array()).all()) return d;
    }
    return d.cwiseMax(lo).cwiseMin(hi);
}

VectorXd sample_factors(int n, double corr, const PerturbationConfig& config, Rng& rng) {
    if (n < 1) throw ConfigError("sample_factors needs n >= 1");
    if (!(corr >= 0 && corr <= 1)) throw ConfigError("factor correlation must lie in [0, 1]");
    const VectorXd sigma = VectorXd::Constant(n, config.mu / config.z95);
    return VectorXd::Ones(n) + correlated_normal(sigma, corr, rng);
}

VectorXd input_vector(const GridCase& grid, const VectorXd& d, const VectorXd& c, const VectorXd& gub) {
    const int nl = grid.n_load();
    const int ng = grid.n_gen();
    VectorXd x(nl + 2 * ng);
    x.head(nl) = d.cwiseQuotient(safe_base(grid.d0));
    x.segment(nl, ng) = c.cwiseQuotient(safe_base(grid.c0));
    x.tail(ng) = gub.cwiseQuotient(safe_base(grid.gub0));
    return x;
}

Instance assemble_instance(const GridCase& grid, VectorXd d, const VectorXd& cost_factor,
                           const VectorXd& bound_factor) {
    Instance inst;
    inst.d = std::move(d);
    inst.c = cost_factor.cwiseProduct(grid.c0).cwiseMax(0.0);
    const VectorXd capacity0 = grid.gub0 - grid.glb;
    inst.gub = bound_factor.cwiseProduct(grid.gub0).cwiseMax(grid.glb + 0.01 * capacity0);
    inst.x = input_vector(grid, inst.d, inst.c, inst.gub);
    return inst;
}

Instance make_instance(const GridCase& grid, const PerturbationConfig& config, Rng& rng) {
    VectorXd d = sample_loads(grid, config, rng);
    const VectorXd fc = sample_factors(grid.n_gen(), config.factor_corr, config, rng);
    const VectorXd fg = sample_factors(grid.n_gen(), config.factor_corr, config, rng);
    return assemble_instance(grid, std::move(d), fc, fg);
}

bool has_capacity_headroom(const GridCase& grid, const Instance& inst) {
    const double total = inst.d.sum();
    return grid.glb.sum() <= total && total <= inst.gub.sum();
}

std::uint64_t instance_seed(std::uint64_t stream_seed, std::uint64_t index) {
    return splitmix64(splitmix64(stream_seed) ^ (index * 0xd1b54a32d192ed03ULL));
}

Instance sample_feasible_instance(const GridCase& grid, const PerturbationConfig& config, std::uint64_t index,
                                  SampleStats* stats) {
    std::uint64_t seed = instance_seed(config.seed, index);
    for (int attempt = 0; attempt < kMaxFeasibilityResamples; ++attempt) {
        Rng rng(seed);
        Instance inst = make_instance(grid, config, rng);
        if (has_capacity_headroom(grid, inst)) {
            inst.seed = seed;
            return inst;
        }
        if (stats) ++stats->resamples;
        seed = splitmix64(seed);
    }
    throw DataError("could not sample an instance with 1'glb <= 1'd <= 1'gub; check the case capacities");
}

}  // namespace scopf
