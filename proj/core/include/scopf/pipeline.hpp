#pragma once

#include "scopf/grid.hpp"
#include "scopf/layers.hpp"
#include "scopf/nn.hpp"
#include "scopf/scopf.hpp"

namespace scopf {

/// One forward evaluation of the primal pipeline from the raw network output
/// z: bound map, repair, one binary search per generator contingency, slack
/// retrieval, objective and balance residuals.
struct PipelineOutput {
    VectorXd g_check;
    PrimalEstimate est;
    double objective = 0.0;
    VectorXd h;
    LayerTape tape;
};

PipelineOutput primal_pipeline(const GridModel& model, const PreparedInstance& prep, const VectorXd& z,
                               int iterations = kDefaultBisectionIterations);

/// Gradient w.r.t. z of  w_objective * objective + w_h' h + w_g' g_tilde,
/// chained through the recorded tape (frozen branches, constant n_k).
/// `w_g` may be empty.
VectorXd pipeline_vjp(const GridModel& model, const PreparedInstance& prep, const PipelineOutput& out,
                      double w_objective, const VectorXd& w_h, const VectorXd& w_g = VectorXd());

/// Same chain but stopping at g_tilde: d(objective)/d g_tilde and d(h)/d g_tilde
/// contracted with the weights.
VectorXd objective_and_residual_grad(const GridModel& model, const PreparedInstance& prep,
                                     const PipelineOutput& out, double w_objective, const VectorXd& w_h);

/// Primal network inference for a single instance.
PipelineOutput infer(const GridModel& model, const Mlp& primal, const PreparedInstance& prep, const VectorXd& x,
                     int iterations = kDefaultBisectionIterations);

}  // namespace scopf
