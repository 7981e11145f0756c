#include "scopf/pipeline.hpp"

namespace scopf {

namespace {

// Subgradient of max{0, f - fub, flb - f} w.r.t. f, zero on the kinks.
VectorXd slack_sign(const VectorXd& f, const GridCase& grid) {
    VectorXd s(f.size());
    for (Eigen::Index l = 0; l < f.size(); ++l) s[l] = f[l] > grid.fub[l] ? 1.0 : (f[l] < grid.flb[l] ? -1.0 : 0.0);
    return s;
}

}  // namespace

PipelineOutput primal_pipeline(const GridModel& model, const PreparedInstance& prep, const VectorXd& z,
                               int iterations) {
    PipelineOutput out;
    out.g_check = bound_map(z, prep.glb, prep.gub, &out.tape.sig);
    out.est.g = repair_layer(out.g_check, prep.d_total, prep.glb, prep.gub, &out.tape.repair);

    const auto& kg = model.contingencies.gen;
    const auto nkg = static_cast<Eigen::Index>(kg.size());
    const Eigen::Index ng = model.n_gen();
    out.est.gk.resize(nkg, ng);
    out.est.nk.resize(nkg);
    out.est.rhok.resize(nkg, ng);
    out.tape.searches.reserve(kg.size());
    for (Eigen::Index r = 0; r < nkg; ++r) {
        const int k = kg[static_cast<std::size_t>(r)];
        BinarySearchResult bs = binary_search_layer(out.est.g, prep.d_total, k, prep.droop, prep.gub, iterations);
        out.est.gk.row(r) = bs.gk.transpose();
        out.est.nk[r] = bs.n;
        for (Eigen::Index i = 0; i < ng; ++i) out.est.rhok(r, i) = bs.capped[static_cast<std::size_t>(i)];
        out.tape.searches.push_back(std::move(bs));
    }
    retrieve_slacks(model, prep, out.est);
    out.objective = scopf_objective(prep.c, out.est, model.grid.penalty_pi);
    out.h = balance_residuals(out.est, prep.d_total);
    return out;
}

VectorXd objective_and_residual_grad(const GridModel& model, const PreparedInstance& prep,
                                     const PipelineOutput& out, double w_objective, const VectorXd& w_h) {
    const auto& grid = model.grid;
    const double pi = grid.penalty_pi;
    const auto& kg = model.contingencies.gen;
    const auto& ke = model.contingencies.line;

    VectorXd grad_g = w_objective * prep.c;

    // Base case and line contingencies both act on the base flows f.
    const VectorXd f = base_flows(model, prep, out.est.g);
    VectorXd grad_f = slack_sign(f, grid);
    for (int k : ke) {
        const auto lodf_k = model.lodf.lodf.col(k);
        VectorXd s = slack_sign(f + f[k] * lodf_k, grid);
        s[k] = 0.0;
        grad_f += s;
        grad_f[k] += lodf_k.dot(s);
    }
    // f = ptdf d_bus - ptdf_gen g
    grad_g -= (w_objective * pi) * (model.ptdf_gen.transpose() * grad_f);

    for (std::size_t r = 0; r < kg.size(); ++r) {
        const int k = kg[r];
        const auto& bs = out.tape.searches[r];
        const VectorXd fk = base_flows(model, prep, bs.gk);
        VectorXd grad_gk = -(w_objective * pi) * (model.ptdf_gen.transpose() * slack_sign(fk, grid));
        if (w_h.size() > 0) grad_gk.array() += w_h[static_cast<Eigen::Index>(r)];
        grad_g += binary_search_vjp(bs, k, grad_gk);
    }
    return grad_g;
}

VectorXd pipeline_vjp(const GridModel& model, const PreparedInstance& prep, const PipelineOutput& out,
                      double w_objective, const VectorXd& w_h, const VectorXd& w_g) {
    VectorXd grad_g = objective_and_residual_grad(model, prep, out, w_objective, w_h);
    if (w_g.size() > 0) grad_g += w_g;
    const VectorXd grad_check = repair_layer_vjp(out.tape.repair, prep.d_total, prep.glb, prep.gub, grad_g);
    return bound_map_vjp(out.tape.sig, prep.glb, prep.gub, grad_check);
}

PipelineOutput infer(const GridModel& model, const Mlp& primal, const PreparedInstance& prep, const VectorXd& x,
                     int iterations) {
    return primal_pipeline(model, prep, primal.forward(x), iterations);
}

}  // namespace scopf
