#include "scopf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "scopf/error.hpp"

namespace scopf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPolishFloor = 1e-7;
constexpr std::uint64_t kPolishEvalCap = 2'000'000;

double slack_sum(const VectorXd& f, const GridCase& grid, int skip = -1) {
    double s = 0.0;
    for (Eigen::Index l = 0; l < f.size(); ++l) {
        if (l == skip) continue;
        s += std::max({0.0, f[l] - grid.fub[l], grid.flb[l] - f[l]});
    }
    return s;
}

// Allocation-free evaluation of the reduced objective. The bisection follows
// binary_search_layer step for step (same trials, same best-trial rule).
class SliceEvaluator {
  public:
    SliceEvaluator(const GridModel& model, const PreparedInstance& prep)
        : model_(model), prep_(prep), f_(model.n_line()), post_(model.n_line()), gk_(model.n_gen()) {}

    // Returns early with a partial sum once it reaches `cutoff`; slacks only
    // add, so the partial sum is a valid lower bound on the result.
    double operator()(const VectorXd& g, double cutoff = kInf) {
        ++evals;
        const auto& grid = model_.grid;
        const double pi = grid.penalty_pi;

        for (int k : model_.contingencies.gen) {
            // Cheap rejection when even full response cannot cover the outage.
            if (residual(g, k, 1.0) < -kContingencyBalanceTolerance - 1e-9) return kInf;
        }

        double value = prep_.c.dot(g);
        f_.noalias() = prep_.load_flow - model_.ptdf_gen * g;
        double slack = slack_sum(f_, grid);

        for (int k : model_.contingencies.line) {
            post_ = f_ + f_[k] * model_.lodf.lodf.col(k);
            slack += slack_sum(post_, grid, k);
        }
        if (value + pi * slack >= cutoff) return value + pi * slack;

        for (int k : model_.contingencies.gen) {
            const double n = solve_signal(g, k);
            if (std::abs(residual(g, k, n)) > kContingencyBalanceTolerance) return kInf;
            fill_contingency(g, k, n);
            post_.noalias() = prep_.load_flow - model_.ptdf_gen * gk_;
            slack += slack_sum(post_, grid);
            if (value + pi * slack >= cutoff) return value + pi * slack;
        }
        return value + pi * slack;
    }

    std::uint64_t evals = 0;

  private:
    double residual(const VectorXd& g, int k, double n) const {
        double total = 0.0;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            if (i == k) continue;
            const double r = g[i] + n * prep_.droop[i];
            total += r > prep_.gub[i] ? prep_.gub[i] : r;
        }
        return total - prep_.d_total;
    }

    void fill_contingency(const VectorXd& g, int k, double n) {
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const double r = g[i] + n * prep_.droop[i];
            gk_[i] = i == k ? 0.0 : (r > prep_.gub[i] ? prep_.gub[i] : r);
        }
    }

    double solve_signal(const VectorXd& g, int k) const {
        double lo = 0.0, hi = 1.0, n = 0.5;
        double best_n = n, best_abs = kInf;
        for (int j = 0; j < kOracleBisectionIterations; ++j) {
            const double e = residual(g, k, n);
            if (std::abs(e) < best_abs) {
                best_abs = std::abs(e);
                best_n = n;
            }
            if (e == 0.0) return n;
            if (e > 0.0)
                hi = n;
            else
                lo = n;
            n = 0.5 * (lo + hi);
        }
        if (std::abs(residual(g, k, n)) <= best_abs) best_n = n;
        return best_n;
    }

    const GridModel& model_;
    const PreparedInstance& prep_;
    VectorXd f_;
    VectorXd post_;
    VectorXd gk_;
};

void check_on_slice(const PreparedInstance& prep, const VectorXd& g) {
    const double tol = 1e-7 * std::max(1.0, std::abs(prep.d_total));
    if (std::abs(g.sum() - prep.d_total) > tol)
        throw ConfigError("oracle_objective: dispatch is not balanced (1'g - 1'd = " +
                          std::to_string(g.sum() - prep.d_total) + ")");
    if (((g - prep.glb).array() < -1e-12).any() || ((g - prep.gub).array() > 1e-12).any())
        throw ConfigError("oracle_objective: dispatch violates its bounds");
}

// Grid values glb + j * res, plus the upper end when it is off the grid.
std::vector<double> axis_values(double lo, double hi, double res) {
    std::vector<double> v;
    const auto steps = static_cast<std::int64_t>(std::floor((hi - lo) / res + 1e-9));
    v.reserve(static_cast<std::size_t>(steps) + 2);
    for (std::int64_t j = 0; j <= steps; ++j) v.push_back(lo + static_cast<double>(j) * res);
    if (hi - v.back() > 1e-12) v.push_back(hi);
    return v;
}

struct LatticeBest {
    double value = kInf;
    VectorXd g;
    std::uint64_t evals = 0;
};

// Scans every lattice point whose first free coordinate index lies in
// [first, last). Points whose linear cost already reaches the incumbent are
// skipped: slacks are nonnegative, so they cannot improve on it.
LatticeBest scan(const GridModel& model, const PreparedInstance& prep, const std::vector<std::vector<double>>& axes,
                 std::size_t first, std::size_t last) {
    LatticeBest best;
    SliceEvaluator eval(model, prep);
    const int ng = model.n_gen();
    const int free = ng - 1;
    VectorXd g(ng);
    std::vector<std::size_t> idx(static_cast<std::size_t>(free), 0);
    if (free == 0) {
        g[0] = prep.d_total;
        if (g[0] >= prep.glb[0] - 1e-12 && g[0] <= prep.gub[0] + 1e-12) {
            g[0] = std::clamp(g[0], prep.glb[0], prep.gub[0]);
            best.value = eval(g);
            best.g = g;
        }
        best.evals = eval.evals;
        return best;
    }
    if (first >= last) return best;
    idx[0] = first;
    while (true) {
        double partial = 0.0;
        for (int i = 0; i < free; ++i) {
            g[i] = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
            partial += g[i];
        }
        const double dep = prep.d_total - partial;
        const int last_gen = ng - 1;
        if (dep >= prep.glb[last_gen] - 1e-12 && dep <= prep.gub[last_gen] + 1e-12) {
            g[last_gen] = std::clamp(dep, prep.glb[last_gen], prep.gub[last_gen]);
            if (prep.c.dot(g) < best.value) {
                const double v = eval(g, best.value);
                if (v < best.value) {
                    best.value = v;
                    best.g = g;
                }
            }
        }
        // Odometer increment, innermost axis fastest.
        int a = free - 1;
        while (a >= 0) {
            auto& i = idx[static_cast<std::size_t>(a)];
            ++i;
            const std::size_t limit = a == 0 ? last : axes[static_cast<std::size_t>(a)].size();
            if (i < limit) break;
            if (a == 0) {
                best.evals = eval.evals;
                return best;
            }
            i = 0;
            --a;
        }
    }
}

}  // namespace

double oracle_objective(const GridModel& model, const PreparedInstance& prep, const VectorXd& g) {
    check_on_slice(prep, g);
    SliceEvaluator eval(model, prep);
    return eval(g);
}

double oracle_lipschitz_bound(const GridModel& model, const PreparedInstance& prep) {
    const MatrixXd& pg = model.ptdf_gen;
    auto induced_l1 = [](const MatrixXd& m) { return m.cols() == 0 ? 0.0 : m.cwiseAbs().colwise().sum().maxCoeff(); };
    const double base = induced_l1(pg);
    // Contingency dispatches move by at most twice the base perturbation in 1-norm.
    double flow = base * (1.0 + 2.0 * model.n_gen_contingencies());
    for (int k : model.contingencies.line) {
        MatrixXd redistributed = pg + model.lodf.lodf.col(k) * pg.row(k);
        redistributed.row(k).setZero();
        flow += induced_l1(redistributed);
    }
    return prep.c.lpNorm<1>() + model.grid.penalty_pi * flow;
}

OracleResult oracle_solve(const GridModel& model, const Instance& inst, double resolution) {
    const int ng = model.n_gen();
    if (ng > kMaxOracleGenerators)
        throw ConfigError("the enumeration oracle supports at most " + std::to_string(kMaxOracleGenerators) +
                          " generators; this case has " + std::to_string(ng));
    if (!(resolution > 0)) throw ConfigError("oracle resolution must be positive");
    const PreparedInstance prep = prepare_instance(model, inst);
    if (prep.glb.sum() > prep.d_total + 1e-12 || prep.gub.sum() < prep.d_total - 1e-12)
        throw DataError("infeasible instance");

    std::vector<std::vector<double>> axes;
    for (int i = 0; i + 1 < ng; ++i) axes.push_back(axis_values(prep.glb[i], prep.gub[i], resolution));

    // Partition the outermost axis across threads; merge keeps the lowest
    // lattice index among equal minima, so the answer is thread-count independent.
    const std::size_t outer = axes.empty() ? 1 : axes.front().size();
    const std::size_t workers =
        std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::min<std::size_t>(outer, 16));
    std::vector<LatticeBest> parts(workers);
    if (workers == 1) {
        parts[0] = scan(model, prep, axes, 0, outer);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t a = outer * w / workers;
            const std::size_t b = outer * (w + 1) / workers;
            threads.emplace_back([&, w, a, b] { parts[w] = scan(model, prep, axes, a, b); });
        }
        for (auto& t : threads) t.join();
    }
    LatticeBest best;
    for (auto& p : parts) {
        best.evals += p.evals;
        if (p.value < best.value) {
            best.value = p.value;
            best.g = p.g;
        }
    }

    OracleResult res;
    res.evals = best.evals;
    if (!std::isfinite(best.value)) return res;

    // Pairwise transfers with a shrinking step.
    SliceEvaluator eval(model, prep);
    VectorXd g = best.g;
    double value = best.value;
    double step = resolution;
    while (step >= kPolishFloor && eval.evals < kPolishEvalCap) {
        bool improved = false;
        for (int i = 0; i < ng; ++i) {
            for (int j = 0; j < ng; ++j) {
                if (i == j) continue;
                const double delta = std::min({step, g[i] - prep.glb[i], prep.gub[j] - g[j]});
                if (delta <= 0) continue;
                VectorXd trial = g;
                trial[i] -= delta;
                trial[j] += delta;
                const double v = eval(trial);
                if (v < value) {
                    value = v;
                    g = std::move(trial);
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
    }

    res.feasible = true;
    res.g_star = g;
    res.obj_star = value;
    res.evals += eval.evals;
    const double spread = std::max(std::sqrt(static_cast<double>(ng)), static_cast<double>(ng - 1));
    res.tol_certificate = oracle_lipschitz_bound(model, prep) * resolution * spread;
    return res;
}

OracleLabel to_label(const OracleResult& r) {
    OracleLabel label;
    label.feasible = r.feasible;
    if (r.feasible) {
        label.g_star = r.g_star;
        label.obj_star = r.obj_star;
        label.tol_certificate = r.tol_certificate;
    }
    return label;
}

}  // namespace scopf
