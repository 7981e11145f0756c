#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "scopf/dataset.hpp"
#include "scopf/nn.hpp"
#include "scopf/pipeline.hpp"

namespace scopf {

enum class Method { Pdl, Penalty, Naive, Ld };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
bool is_supervised(Method m);

struct TrainerConfig {
    int outer_iterations = 20;   // K
    int inner_iterations = 2000;  // L
    int batch = 8;
    double rho0 = 0.1;
    double rho_max = 1e8;
    double tau = 0.9;
    double alpha = 2.0;
    double dual_loss_rho = 0.1;
    double obj_scale = 1e5;
    double lr = 1e-4;
    double ld_rho = 1e3;  // fixed penalty of the LD baseline
    int bisection_iterations = kDefaultBisectionIterations;
    std::uint64_t seed = 0;

    void validate() const;
    /// Optimizer steps of one run: 2 K L for PDL (primal and dual), K L for
    /// the single-network baselines.
    [[nodiscard]] std::int64_t total_steps(Method method) const;
};

struct TrainerState {
    double rho = 0.1;
    double v_prev = std::numeric_limits<double>::infinity();
    int outer = 0;
    std::int64_t step = 0;  // global optimizer step, shared by primal and dual updates
};

/// Per-outer-iteration record.
struct HistoryEntry {
    int outer_k = 0;
    double rho = 0.0;       // penalty used during this outer iteration
    double rho_next = 0.0;  // after the update rule
    double v_k = 0.0;
    double v_prev = 0.0;
    double mean_objective = 0.0;
};

/// One optimizer step. For PDL, inner_l in [1, L] are primal steps and
/// [L + 1, 2L] dual steps; the baselines log [1, L].
struct LogRow {
    int outer_k = 0;
    int inner_l = 0;
    double loss = 0.0;
    double rho = 0.0;
    double v_k = 0.0;
    double lr = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    Method method = Method::Pdl;
    TrainerConfig config;
    Mlp primal;
    AdamState primal_adam;
    std::optional<Mlp> dual;
    std::optional<Mlp> frozen_dual;
    AdamState dual_adam;
    TrainerState state;
    std::vector<HistoryEntry> history;
    std::vector<LogRow> log;
};

/// Training instances with their per-instance caches and inputs.
struct PreparedSet {
    std::vector<PreparedInstance> prepared;
    MatrixXd inputs;                  // dim(x) x N
    std::vector<VectorXd> g_star;     // empty unless every record is labeled feasible
    std::vector<std::size_t> source;  // record index of each prepared entry
};

/// Prepares every record; when `require_labels`, keeps only records labeled
/// feasible and throws if the dataset carries no labels.
PreparedSet prepare_set(const GridModel& model, const Dataset& data, bool require_labels);

// Loss pieces --------------------------------------------------------------

struct PrimalLossValue {
    double value = 0.0;
    double d_objective = 0.0;
    VectorXd d_h;
};

/// objective / obj_scale + lambda' h + rho / 2 * 1'(h^2)
PrimalLossValue primal_loss(double objective, const VectorXd& h, const VectorXd& lambda, double rho,
                            double obj_scale);

/// objective / obj_scale + rho * 1'(h^2)
PrimalLossValue penalty_loss(double objective, const VectorXd& h, double rho, double obj_scale);

/// |lambda_new - (lambda_frozen + dual_rho h)|_2
double dual_loss(const VectorXd& lambda_new, const VectorXd& lambda_frozen, const VectorXd& h, double dual_rho);

/// |g - g_star|_2 and its gradient w.r.t. g (zero at the minimizer).
double naive_loss(const VectorXd& g, const VectorXd& g_star, VectorXd* grad = nullptr);

/// |g - g_star|_2 + rho * 1'(h^2)
double ld_loss(const VectorXd& g, const VectorXd& g_star, const VectorXd& h, double rho);

/// max over the set of |h|_inf under the primal network.
double max_violation(const GridModel& model, const PreparedSet& set, const Mlp& primal,
                     int iterations = kDefaultBisectionIterations);

/// min(alpha rho, rho_max) when v > tau v_prev, otherwise rho.
double update_penalty(double rho, double v, double v_prev, const TrainerConfig& config);

/// Primal network of the documented architecture for this model.
Mlp make_primal_network(const GridModel& model, Rng& rng);
Mlp make_dual_network(const GridModel& model, Rng& rng);

/// Called after every outer iteration with the run so far.
using ProgressFn = std::function<void(const TrainResult&)>;

TrainResult train_pdl(const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                      const ProgressFn& progress = {});
TrainResult train_penalty(const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                          const ProgressFn& progress = {});
TrainResult train_naive(const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                        const ProgressFn& progress = {});
TrainResult train_ld(const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                     const ProgressFn& progress = {});

TrainResult train(Method method, const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                  const ProgressFn& progress = {});

std::string log_to_csv(const std::vector<LogRow>& rows);

}  // namespace scopf
