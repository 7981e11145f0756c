#include "scopf/layers.hpp"

#include <cmath>

#include "scopf/error.hpp"
#include "scopf/scopf.hpp"

namespace scopf {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

VectorXd bound_map(const VectorXd& z, const VectorXd& glb, const VectorXd& gub, VectorXd* sig) {
    VectorXd s = z.unaryExpr([](double v) { return sigmoid(v); });
    VectorXd g = (glb + s.cwiseProduct(gub - glb)).cwiseMin(gub);
    if (sig) *sig = std::move(s);
    return g;
}

VectorXd bound_map_vjp(const VectorXd& sig, const VectorXd& glb, const VectorXd& gub, const VectorXd& grad_out) {
    return grad_out.cwiseProduct(gub - glb).cwiseProduct(sig).cwiseProduct((1.0 - sig.array()).matrix());
}

VectorXd repair_layer(const VectorXd& g_check, double d_total, const VectorXd& glb, const VectorXd& gub,
                      RepairTape* tape) {
    RepairTape t;
    t.g_in = g_check;
    t.sum_in = g_check.sum();
    VectorXd out;
    if (t.sum_in < d_total) {
        t.sum_bound = gub.sum();
        const double room = t.sum_bound - t.sum_in;
        if (room <= 0.0) {
            t.branch = RepairBranch::Saturated;
            t.zeta = 1.0;
            out = gub;
        } else {
            t.branch = RepairBranch::Deficit;
            t.zeta = (d_total - t.sum_in) / room;
            out = (1.0 - t.zeta) * g_check + t.zeta * gub;
        }
    } else if (t.sum_in == d_total) {
        t.branch = RepairBranch::Identity;
        out = g_check;
    } else {
        t.branch = RepairBranch::Surplus;
        t.sum_bound = glb.sum();
        t.zeta = (t.sum_in - d_total) / (t.sum_in - t.sum_bound);
        out = (1.0 - t.zeta) * g_check + t.zeta * glb;
    }
    out = out.cwiseMax(glb).cwiseMin(gub);
    if (tape) *tape = std::move(t);
    return out;
}

VectorXd repair_layer_vjp(const RepairTape& tape, double d_total, const VectorXd& glb, const VectorXd& gub,
                          const VectorXd& grad_out) {
    switch (tape.branch) {
        case RepairBranch::Identity:
            return grad_out;
        case RepairBranch::Saturated:
            return VectorXd::Zero(grad_out.size());
        case RepairBranch::Deficit: {
            // zeta = (D - S) / (U - S), d zeta / d g_j = (D - U) / (U - S)^2
            const double room = tape.sum_bound - tape.sum_in;
            const double dzeta = (d_total - tape.sum_bound) / (room * room);
            const double along = grad_out.dot(gub - tape.g_in);
            return ((1.0 - tape.zeta) * grad_out.array() + dzeta * along).matrix();
        }
        case RepairBranch::Surplus: {
            // zeta = (S - D) / (S - L), d zeta / d g_j = (D - L) / (S - L)^2
            const double excess = tape.sum_in - tape.sum_bound;
            const double dzeta = (d_total - tape.sum_bound) / (excess * excess);
            const double along = grad_out.dot(glb - tape.g_in);
            return ((1.0 - tape.zeta) * grad_out.array() + dzeta * along).matrix();
        }
    }
    return grad_out;
}

BinarySearchResult binary_search_layer(const VectorXd& g, double d_total, int k, const VectorXd& droop,
                                       const VectorXd& gub, int iterations) {
    if (iterations < 1) throw ConfigError("binary search needs at least one iteration");
    if (k < 0 || k >= g.size()) throw ConfigError("binary search: outage index out of range");

    auto evaluate = [&](double n) {
        AprRow row = apr_response(g, n, k, droop, gub);
        const double residual = row.g.sum() - d_total;
        return BinarySearchResult{std::move(row.g), n, std::move(row.capped), residual};
    };

    double lo = 0.0;
    double hi = 1.0;
    double n = 0.5;
    BinarySearchResult best;
    bool have_best = false;
    bool exact = false;
    for (int j = 0; j < iterations; ++j) {
        BinarySearchResult trial = evaluate(n);
        const double e = trial.residual;
        if (!have_best || std::abs(e) < std::abs(best.residual)) {
            best = std::move(trial);
            have_best = true;
        }
        if (e == 0.0) {
            exact = true;
            break;
        }
        if (e > 0.0)
            hi = n;
        else
            lo = n;
        n = 0.5 * (lo + hi);
    }
    if (!exact) {
        BinarySearchResult last = evaluate(n);
        if (std::abs(last.residual) <= std::abs(best.residual)) best = std::move(last);
    }
    return best;
}

VectorXd binary_search_vjp(const BinarySearchResult& result, int k, const VectorXd& grad_gk) {
    VectorXd grad(grad_gk.size());
    for (Eigen::Index i = 0; i < grad_gk.size(); ++i)
        grad[i] = (i == k || result.capped[static_cast<std::size_t>(i)]) ? 0.0 : grad_gk[i];
    return grad;
}

}  // namespace scopf
