#pragma once

#include <cstdint>

#include "scopf/dataset.hpp"
#include "scopf/scopf.hpp"

namespace scopf {

inline constexpr int kOracleBisectionIterations = 40;
inline constexpr double kContingencyBalanceTolerance = 1e-6;
inline constexpr int kMaxOracleGenerators = 5;

/// Model objective as a function of the nominal dispatch alone: contingency
/// dispatches come from the binary search (40 iterations), slacks from the
/// flows. Returns +inf when some generator contingency cannot be balanced to
/// within 1e-6 p.u. Throws ConfigError if g is off the balanced box.
double oracle_objective(const GridModel& model, const PreparedInstance& prep, const VectorXd& g);

/// Lipschitz constant of oracle_objective w.r.t. the 1-norm of g on the
/// balanced slice: |c|_1 + Pi * L_flow.
double oracle_lipschitz_bound(const GridModel& model, const PreparedInstance& prep);

struct OracleResult {
    bool feasible = false;
    VectorXd g_star;
    double obj_star = 0.0;
    double tol_certificate = 0.0;
    std::uint64_t evals = 0;
};

/// Exhaustive lattice search over the balanced slice at spacing `resolution`
/// followed by a pairwise-transfer polish. At most kMaxOracleGenerators
/// generators. Throws DataError("infeasible instance") when the slice is
/// empty; returns feasible == false when every lattice point violates a
/// contingency balance.
OracleResult oracle_solve(const GridModel& model, const Instance& inst, double resolution);

OracleLabel to_label(const OracleResult& r);

}  // namespace scopf
