#include "scopf/scopf.hpp"

namespace scopf {

PreparedInstance prepare_instance(const GridModel& model, const Instance& inst) {
    const auto& grid = model.grid;
    PreparedInstance p;
    p.d_bus = aggregate_loads(grid, inst.d);
    p.d_total = inst.d.sum();
    p.c = inst.c;
    p.glb = grid.glb;
    p.gub = inst.gub;
    p.droop = grid.gamma.cwiseProduct(inst.gub - grid.glb);
    p.load_flow = model.ptdf * p.d_bus;
    return p;
}

AprRow apr_response(const VectorXd& g, double n, int k, const VectorXd& droop, const VectorXd& gub) {
    AprRow row{VectorXd(g.size()), std::vector<std::uint8_t>(static_cast<std::size_t>(g.size()), 0)};
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (i == k) {
            row.g[i] = 0.0;
            continue;
        }
        const double response = g[i] + n * droop[i];
        if (response > gub[i]) {
            row.g[i] = gub[i];
            row.capped[static_cast<std::size_t>(i)] = 1;
        } else {
            row.g[i] = response;
        }
    }
    return row;
}

VectorXd base_flows(const GridModel& model, const PreparedInstance& prep, const VectorXd& g) {
    return prep.load_flow - model.ptdf_gen * g;
}

VectorXd base_flows(const GridModel& model, const VectorXd& d_bus, const VectorXd& g) {
    return model.ptdf * (d_bus - model.incidence * g);
}

VectorXd slack_base(const VectorXd& f, const GridCase& grid) {
    return (f - grid.fub).cwiseMax(grid.flb - f).cwiseMax(0.0);
}

VectorXd slack_gen_contingency(const GridModel& model, const PreparedInstance& prep, const VectorXd& gk_row) {
    return slack_base(base_flows(model, prep, gk_row), model.grid);
}

VectorXd slack_line_contingency(const GridModel& model, const VectorXd& f, int k) {
    VectorXd post = f + f[k] * model.lodf.lodf.col(k);
    VectorXd eta = slack_base(post, model.grid);
    eta[k] = 0.0;
    return eta;
}

void retrieve_slacks(const GridModel& model, const PreparedInstance& prep, PrimalEstimate& est) {
    const auto& kg = model.contingencies.gen;
    const auto& ke = model.contingencies.line;
    const VectorXd f = base_flows(model, prep, est.g);
    est.eta0 = slack_base(f, model.grid);
    est.eta_g.resize(static_cast<Eigen::Index>(kg.size()), model.n_line());
    for (std::size_t r = 0; r < kg.size(); ++r)
        est.eta_g.row(static_cast<Eigen::Index>(r)) =
            slack_gen_contingency(model, prep, est.gk.row(static_cast<Eigen::Index>(r)).transpose()).transpose();
    est.eta_e.resize(static_cast<Eigen::Index>(ke.size()), model.n_line());
    for (std::size_t r = 0; r < ke.size(); ++r)
        est.eta_e.row(static_cast<Eigen::Index>(r)) = slack_line_contingency(model, f, ke[r]).transpose();
}

double total_slack(const PrimalEstimate& est) {
    return est.eta0.lpNorm<1>() + est.eta_g.cwiseAbs().sum() + est.eta_e.cwiseAbs().sum();
}

double scopf_objective(const VectorXd& c, const PrimalEstimate& est, double penalty_pi) {
    return c.dot(est.g) + penalty_pi * total_slack(est);
}

VectorXd balance_residuals(const PrimalEstimate& est, double d_total) {
    return (est.gk.rowwise().sum().array() - d_total).matrix();
}

}  // namespace scopf
