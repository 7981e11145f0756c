#pragma once

#include <cstdint>

#include "scopf/grid.hpp"
#include "scopf/sampler.hpp"

namespace scopf {

using MatrixXb = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-instance quantities shared by every evaluator: bus-aggregated demand,
/// instance bounds and droop slopes gamma_i * (gub_i - glb_i).
struct PreparedInstance {
    VectorXd d_bus;
    double d_total = 0.0;
    VectorXd c;
    VectorXd glb;
    VectorXd gub;
    VectorXd droop;
    VectorXd load_flow;  // ptdf * d_bus
};

PreparedInstance prepare_instance(const GridModel& model, const Instance& inst);

/// Nominal dispatch, contingency dispatches and all thermal slacks.
/// Row r of gk / nk / rhok / eta_g belongs to generator contingency
/// model.contingencies.gen[r]; row r of eta_e to line contingency
/// model.contingencies.line[r].
struct PrimalEstimate {
    VectorXd g;
    MatrixXd gk;
    VectorXd nk;
    MatrixXb rhok;
    VectorXd eta0;
    MatrixXd eta_g;
    MatrixXd eta_e;
};

struct AprRow {
    VectorXd g;
    std::vector<std::uint8_t> capped;
};

/// Automatic primary response of the survivors of generator outage `k` at
/// global signal `n`: g_i + n droop_i capped at gub_i, outaged unit at zero.
/// Capped when the uncapped response strictly exceeds gub_i.
AprRow apr_response(const VectorXd& g, double n, int k, const VectorXd& droop, const VectorXd& gub);

/// f = ptdf (d_bus - B g), using the cached ptdf * d_bus.
VectorXd base_flows(const GridModel& model, const PreparedInstance& prep, const VectorXd& g);
VectorXd base_flows(const GridModel& model, const VectorXd& d_bus, const VectorXd& g);

/// max{0, f - fub, flb - f}
VectorXd slack_base(const VectorXd& f, const GridCase& grid);

VectorXd slack_gen_contingency(const GridModel& model, const PreparedInstance& prep, const VectorXd& gk_row);

/// Slack of the post-outage flows f + f_k lodf_k; entry k is zero.
VectorXd slack_line_contingency(const GridModel& model, const VectorXd& f, int k);

/// Fills eta0, eta_g and eta_e from est.g and est.gk.
void retrieve_slacks(const GridModel& model, const PreparedInstance& prep, PrimalEstimate& est);

double total_slack(const PrimalEstimate& est);

/// c'g + Pi (|eta0|_1 + sum_k |eta_g,k|_1 + sum_k |eta_e,k|_1)
double scopf_objective(const VectorXd& c, const PrimalEstimate& est, double penalty_pi);

/// h_k = 1'gk - 1'd for every generator contingency.
VectorXd balance_residuals(const PrimalEstimate& est, double d_total);

}  // namespace scopf
