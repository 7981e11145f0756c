#include "scopf/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "scopf/error.hpp"

namespace scopf {

std::string to_string(Method m) {
    switch (m) {
        case Method::Pdl: return "pdl";
        case Method::Penalty: return "penalty";
        case Method::Naive: return "naive";
        case Method::Ld: return "ld";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    if (name == "pdl") return Method::Pdl;
    if (name == "penalty") return Method::Penalty;
    if (name == "naive") return Method::Naive;
    if (name == "ld") return Method::Ld;
    throw ConfigError("unknown method '" + name + "' (expected pdl, penalty, naive or ld)");
}

bool is_supervised(Method m) { return m == Method::Naive || m == Method::Ld; }

void TrainerConfig::validate() const {
    if (outer_iterations < 1 || inner_iterations < 1 || batch < 1)
        throw ConfigError("K, L and batch must be positive");
    if (!(tau > 0 && tau < 1)) throw ConfigError("tau must lie in (0, 1)");
    if (!(alpha > 1)) throw ConfigError("alpha must exceed 1");
    if (!(rho0 > 0 && rho_max >= rho0)) throw ConfigError("need 0 < rho0 <= rho_max");
    if (!(dual_loss_rho > 0 && obj_scale > 0 && lr > 0 && ld_rho > 0))
        throw ConfigError("dual_loss_rho, obj_scale, lr and ld_rho must be positive");
    if (bisection_iterations < 1) throw ConfigError("bisection_iterations must be positive");
}

std::int64_t TrainerConfig::total_steps(Method method) const {
    const std::int64_t kl = static_cast<std::int64_t>(outer_iterations) * inner_iterations;
    return method == Method::Pdl ? 2 * kl : kl;
}

PreparedSet prepare_set(const GridModel& model, const Dataset& data, bool require_labels) {
    if (data.records.empty()) throw DataError("dataset is empty");
    if (require_labels) {
        for (const auto& r : data.records)
            if (!r.label)
                throw DataError("dataset has no oracle labels; run the `oracle` command on it first");
    }
    PreparedSet set;
    std::vector<const Record*> kept;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& r = data.records[i];
        if (require_labels && !r.label->feasible) continue;
        kept.push_back(&r);
        set.source.push_back(i);
    }
    if (kept.empty()) throw DataError("no usable records (every instance is labeled infeasible)");
    const Eigen::Index dim = kept.front()->inst.x.size();
    set.inputs.resize(dim, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        set.prepared.push_back(prepare_instance(model, kept[i]->inst));
        set.inputs.col(static_cast<Eigen::Index>(i)) = kept[i]->inst.x;
        if (require_labels) set.g_star.push_back(kept[i]->label->g_star);
    }
    return set;
}

PrimalLossValue primal_loss(double objective, const VectorXd& h, const VectorXd& lambda, double rho,
                            double obj_scale) {
    PrimalLossValue out;
    out.value = objective / obj_scale + lambda.dot(h) + 0.5 * rho * h.squaredNorm();
    out.d_objective = 1.0 / obj_scale;
    out.d_h = lambda + rho * h;
    return out;
}

PrimalLossValue penalty_loss(double objective, const VectorXd& h, double rho, double obj_scale) {
    PrimalLossValue out;
    out.value = objective / obj_scale + rho * h.squaredNorm();
    out.d_objective = 1.0 / obj_scale;
    out.d_h = 2.0 * rho * h;
    return out;
}

double dual_loss(const VectorXd& lambda_new, const VectorXd& lambda_frozen, const VectorXd& h, double dual_rho) {
    return (lambda_new - (lambda_frozen + dual_rho * h)).norm();
}

double naive_loss(const VectorXd& g, const VectorXd& g_star, VectorXd* grad) {
    const VectorXd diff = g - g_star;
    const double norm = diff.norm();
    if (grad) *grad = norm > 0.0 ? VectorXd(diff / norm) : VectorXd(VectorXd::Zero(g.size()));
    return norm;
}

double ld_loss(const VectorXd& g, const VectorXd& g_star, const VectorXd& h, double rho) {
    return naive_loss(g, g_star) + rho * h.squaredNorm();
}

double max_violation(const GridModel& model, const PreparedSet& set, const Mlp& primal, int iterations) {
    const MatrixXd z = primal.forward(set.inputs);
    double v = 0.0;
    for (std::size_t i = 0; i < set.prepared.size(); ++i) {
        const auto out = primal_pipeline(model, set.prepared[i], z.col(static_cast<Eigen::Index>(i)), iterations);
        if (out.h.size() > 0) v = std::max(v, out.h.lpNorm<Eigen::Infinity>());
    }
    return v;
}

double update_penalty(double rho, double v, double v_prev, const TrainerConfig& config) {
    if (v > config.tau * v_prev) return std::min(config.alpha * rho, config.rho_max);
    return rho;
}

Mlp make_primal_network(const GridModel& model, Rng& rng) {
    const int dim = 2 * model.n_gen() + model.n_load();
    Mlp net = Mlp::make(dim, model.n_gen(), hidden_width_for(dim), kHiddenLayers, true);
    net.init(rng);
    return net;
}

Mlp make_dual_network(const GridModel& model, Rng& rng) {
    const int dim = 2 * model.n_gen() + model.n_load();
    Mlp net = Mlp::make(dim, std::max(1, model.n_gen_contingencies()), hidden_width_for(dim), kHiddenLayers, false);
    net.init(rng);
    return net;
}

namespace {

using Clock = std::chrono::steady_clock;

/// Shuffled passes over the training set.
class BatchSampler {
  public:
    BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        reshuffle();
    }

    std::vector<std::size_t> next(int batch) {
        std::vector<std::size_t> out;
        out.reserve(static_cast<std::size_t>(batch));
        for (int b = 0; b < batch; ++b) {
            if (pos_ == order_.size()) reshuffle();
            out.push_back(order_[pos_++]);
        }
        return out;
    }

  private:
    void reshuffle() {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }

    std::vector<std::size_t> order_;
    Rng rng_;
    std::size_t pos_ = 0;
};

MatrixXd gather(const MatrixXd& inputs, const std::vector<std::size_t>& idx) {
    MatrixXd out(inputs.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t b = 0; b < idx.size(); ++b) out.col(static_cast<Eigen::Index>(b)) = inputs.col(static_cast<Eigen::Index>(idx[b]));
    return out;
}

struct InstanceLoss {
    double value = 0.0;
    double d_objective = 0.0;
    VectorXd d_h;
    VectorXd d_g;
};

// (set index, column of z, pipeline output) -> loss and its partials
using LossFn = std::function<InstanceLoss(std::size_t, Eigen::Index, const PipelineOutput&)>;

void check_finite(double loss, const TrainerState& state) {
    if (!std::isfinite(loss))
        throw DivergenceError("non-finite training loss at outer iteration " + std::to_string(state.outer) +
                              ", step " + std::to_string(state.step));
}

// Averages the per-instance losses over the batch and takes one Adam step on `net`.
double primal_step(const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                   const std::vector<std::size_t>& idx, Mlp& net, AdamState& adam, double lr, const LossFn& loss) {
    Mlp::Tape tape;
    const MatrixXd z = net.forward(gather(set.inputs, idx), &tape);
    const double inv_b = 1.0 / static_cast<double>(idx.size());
    MatrixXd grad_z(z.rows(), z.cols());
    double total = 0.0;
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto col = static_cast<Eigen::Index>(b);
        const auto out = primal_pipeline(model, set.prepared[idx[b]], z.col(col), config.bisection_iterations);
        const InstanceLoss l = loss(idx[b], col, out);
        total += l.value;
        grad_z.col(col) =
            inv_b * pipeline_vjp(model, set.prepared[idx[b]], out, l.d_objective, l.d_h, l.d_g);
    }
    const auto grad = net.backward(tape, grad_z);
    adam_step(net.params(), grad.params, adam, lr);
    return total * inv_b;
}

struct SetEvaluation {
    double v = 0.0;
    double mean_objective = 0.0;
    MatrixXd h;  // |Kg| x N
};

SetEvaluation evaluate_set(const GridModel& model, const PreparedSet& set, const Mlp& primal, int iterations) {
    const MatrixXd z = primal.forward(set.inputs);
    SetEvaluation ev;
    ev.h.resize(model.n_gen_contingencies(), static_cast<Eigen::Index>(set.prepared.size()));
    for (std::size_t i = 0; i < set.prepared.size(); ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        const auto out = primal_pipeline(model, set.prepared[i], z.col(col), iterations);
        ev.h.col(col) = out.h;
        if (out.h.size() > 0) ev.v = std::max(ev.v, out.h.lpNorm<Eigen::Infinity>());
        ev.mean_objective += out.objective;
    }
    ev.mean_objective /= static_cast<double>(set.prepared.size());
    return ev;
}

class Trainer {
  public:
    Trainer(Method method, const GridModel& model, const PreparedSet& set, const TrainerConfig& config)
        : model_(model), set_(set), config_(config), sampler_(set.prepared.size(), config.seed ^ 0x5bd1e995ULL),
          start_(Clock::now()) {
        config.validate();
        if (set.prepared.empty()) throw DataError("training set is empty");
        result_.method = method;
        result_.config = config;
        Rng init_rng(config.seed);
        result_.primal = make_primal_network(model, init_rng);
        result_.primal_adam = AdamState::for_params(result_.primal.params().size());
        result_.state.rho = method == Method::Ld ? config.ld_rho : config.rho0;
        if (method == Method::Naive) result_.state.rho = 0.0;
        if (method == Method::Pdl) {
            result_.dual = make_dual_network(model, init_rng);
            result_.dual_adam = AdamState::for_params(result_.dual->params().size());
        }
    }

    double next_lr() { return lr_schedule(config_.lr, result_.state.step, config_.total_steps(result_.method)); }

    void log(int inner_l, double loss, double v, double lr) {
        check_finite(loss, result_.state);
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
        result_.log.push_back({result_.state.outer, inner_l, loss, result_.state.rho, v, lr, ms});
        ++result_.state.step;
    }

    double run_primal_steps(int first_l, int count, double v_shown, const LossFn& loss) {
        double last = 0.0;
        for (int l = 0; l < count; ++l) {
            const double lr = next_lr();
            const auto idx = sampler_.next(config_.batch);
            last = primal_step(model_, set_, config_, idx, result_.primal, result_.primal_adam, lr, loss);
            log(first_l + l, last, v_shown, lr);
        }
        return last;
    }

    // Close an outer iteration: evaluate the set, apply the penalty rule when asked.
    SetEvaluation finish_outer(bool update_rho) {
        auto ev = evaluate_set(model_, set_, result_.primal, config_.bisection_iterations);
        HistoryEntry entry;
        entry.outer_k = result_.state.outer;
        entry.rho = result_.state.rho;
        entry.v_k = ev.v;
        entry.v_prev = result_.state.v_prev;
        entry.mean_objective = ev.mean_objective;
        entry.rho_next = update_rho ? update_penalty(result_.state.rho, ev.v, result_.state.v_prev, config_)
                                    : result_.state.rho;
        pending_ = entry;
        return ev;
    }

    void commit_outer(const ProgressFn& progress) {
        result_.state.rho = pending_.rho_next;
        result_.state.v_prev = pending_.v_k;
        result_.history.push_back(pending_);
        if (progress) progress(result_);
    }

    TrainResult& result() { return result_; }
    const GridModel& model() const { return model_; }
    const PreparedSet& set() const { return set_; }
    const TrainerConfig& config() const { return config_; }
    BatchSampler& sampler() { return sampler_; }

  private:
    const GridModel& model_;
    const PreparedSet& set_;
    const TrainerConfig& config_;
    BatchSampler sampler_;
    Clock::time_point start_;
    TrainResult result_;
    HistoryEntry pending_;
};

double last_v(const TrainResult& r) { return r.history.empty() ? std::numeric_limits<double>::infinity() : r.history.back().v_k; }

}  // namespace

TrainResult train_pdl(const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                      const ProgressFn& progress) {
    Trainer tr(Method::Pdl, model, set, config);
    auto& res = tr.result();
    const int L = config.inner_iterations;
    const Eigen::Index nkg = model.n_gen_contingencies();

    for (int k = 1; k <= config.outer_iterations; ++k) {
        res.state.outer = k;

        // Primal learning with the dual network held fixed.
        const MatrixXd lambda_all = res.dual->forward(set.inputs).topRows(nkg);
        const double rho = res.state.rho;
        const LossFn loss = [&](std::size_t i, Eigen::Index, const PipelineOutput& out) {
            const auto v = primal_loss(out.objective, out.h, lambda_all.col(static_cast<Eigen::Index>(i)), rho,
                                       config.obj_scale);
            return InstanceLoss{v.value, v.d_objective, v.d_h, VectorXd()};
        };
        tr.run_primal_steps(1, L, last_v(res), loss);

        const SetEvaluation ev = tr.finish_outer(true);

        // Dual learning against a frozen copy.
        res.frozen_dual = *res.dual;
        const MatrixXd lambda_frozen = res.frozen_dual->forward(set.inputs);
        for (int l = 1; l <= L; ++l) {
            const double lr = tr.next_lr();
            const auto idx = tr.sampler().next(config.batch);
            const auto b = static_cast<Eigen::Index>(idx.size());
            MatrixXd x(set.inputs.rows(), b);
            MatrixXd target = MatrixXd::Zero(res.dual->outputs(), b);
            for (Eigen::Index j = 0; j < b; ++j) {
                const auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]);
                x.col(j) = set.inputs.col(i);
                target.col(j) = lambda_frozen.col(i);
                target.col(j).head(nkg) += config.dual_loss_rho * ev.h.col(i);
            }
            Mlp::Tape tape;
            const MatrixXd lambda = res.dual->forward(x, &tape);
            MatrixXd diff = lambda - target;
            if (diff.rows() > nkg) diff.bottomRows(diff.rows() - nkg).setZero();
            const double denom = static_cast<double>(b) * static_cast<double>(std::max<Eigen::Index>(1, nkg));
            const double mse = diff.squaredNorm() / denom;
            const auto grad = res.dual->backward(tape, (2.0 / denom) * diff);
            adam_step(res.dual->params(), grad.params, res.dual_adam, lr);
            tr.log(L + l, mse, ev.v, lr);
        }

        tr.commit_outer(progress);
    }
    return std::move(tr.result());
}

TrainResult train_penalty(const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                          const ProgressFn& progress) {
    Trainer tr(Method::Penalty, model, set, config);
    auto& res = tr.result();
    for (int k = 1; k <= config.outer_iterations; ++k) {
        res.state.outer = k;
        const double rho = res.state.rho;
        const LossFn loss = [&](std::size_t, Eigen::Index, const PipelineOutput& out) {
            const auto v = penalty_loss(out.objective, out.h, rho, config.obj_scale);
            return InstanceLoss{v.value, v.d_objective, v.d_h, VectorXd()};
        };
        tr.run_primal_steps(1, config.inner_iterations, last_v(res), loss);
        tr.finish_outer(true);
        tr.commit_outer(progress);
    }
    return std::move(tr.result());
}

namespace {

TrainResult train_supervised(Method method, const GridModel& model, const PreparedSet& set,
                             const TrainerConfig& config, const ProgressFn& progress) {
    if (set.g_star.size() != set.prepared.size())
        throw DataError("supervised training needs oracle labels for every instance; run the `oracle` command first");
    Trainer tr(method, model, set, config);
    auto& res = tr.result();
    const double rho = method == Method::Ld ? config.ld_rho : 0.0;
    const LossFn loss = [&](std::size_t i, Eigen::Index, const PipelineOutput& out) {
        InstanceLoss l;
        l.value = naive_loss(out.est.g, set.g_star[i], &l.d_g);
        l.d_objective = 0.0;
        l.d_h = VectorXd::Zero(out.h.size());
        if (rho > 0) {
            l.value += rho * out.h.squaredNorm();
            l.d_h = 2.0 * rho * out.h;
        }
        return l;
    };
    for (int k = 1; k <= config.outer_iterations; ++k) {
        res.state.outer = k;
        tr.run_primal_steps(1, config.inner_iterations, last_v(res), loss);
        tr.finish_outer(false);
        tr.commit_outer(progress);
    }
    return std::move(tr.result());
}

}  // namespace

TrainResult train_naive(const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                        const ProgressFn& progress) {
    return train_supervised(Method::Naive, model, set, config, progress);
}

TrainResult train_ld(const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                     const ProgressFn& progress) {
    return train_supervised(Method::Ld, model, set, config, progress);
}

TrainResult train(Method method, const GridModel& model, const PreparedSet& set, const TrainerConfig& config,
                  const ProgressFn& progress) {
    switch (method) {
        case Method::Pdl: return train_pdl(model, set, config, progress);
        case Method::Penalty: return train_penalty(model, set, config, progress);
        case Method::Naive: return train_naive(model, set, config, progress);
        case Method::Ld: return train_ld(model, set, config, progress);
    }
    throw ConfigError("unknown method");
}

std::string log_to_csv(const std::vector<LogRow>& rows) {
    std::ostringstream out;
    out.precision(10);
    out << "outer_k,inner_l,loss,rho,v_k,lr,wall_ms\n";
    for (const auto& r : rows)
        out << r.outer_k << ',' << r.inner_l << ',' << r.loss << ',' << r.rho << ',' << r.v_k << ',' << r.lr << ','
            << r.wall_ms << '\n';
    return out.str();
}

}  // namespace scopf
