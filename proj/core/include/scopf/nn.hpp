#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "scopf/sampler.hpp"

namespace scopf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kLayerNormEps = 1e-5;

/// Fully-connected ReLU network stored as one flat parameter vector. Each
/// layer optionally layer-normalizes its input (gain / offset per feature)
/// before the affine map; the last layer is linear.
///
/// Batches are column-major: one sample per column.
class Mlp {
  public:
    Mlp() = default;
    Mlp(std::vector<int> sizes, bool layernorm);

    /// `hidden_layers` ReLU layers of width `width`, then a linear output layer.
    static Mlp make(int inputs, int outputs, int width, int hidden_layers, bool layernorm);

    /// He-uniform hidden layers, output layer scaled by `output_scale`, zero
    /// biases, unit layer-norm gains.
    void init(Rng& rng, double output_scale = 1e-3);

    struct Tape {
        std::vector<MatrixXd> input;     // layer input before normalization
        std::vector<MatrixXd> xhat;      // normalized input (layer norm only)
        std::vector<Eigen::RowVectorXd> inv_std;
        std::vector<MatrixXd> affine_in;  // what the weights multiply
        std::vector<MatrixXd> pre;        // pre-activation
    };

    struct Gradient {
        VectorXd params;
        MatrixXd input;
    };

    [[nodiscard]] MatrixXd forward(const MatrixXd& x, Tape* tape = nullptr) const;
    [[nodiscard]] VectorXd forward(const VectorXd& x) const;
    [[nodiscard]] Gradient backward(const Tape& tape, const MatrixXd& grad_out) const;

    [[nodiscard]] const std::vector<int>& sizes() const { return sizes_; }
    [[nodiscard]] int inputs() const { return sizes_.front(); }
    [[nodiscard]] int outputs() const { return sizes_.back(); }
    [[nodiscard]] int layers() const { return static_cast<int>(sizes_.size()) - 1; }
    [[nodiscard]] bool layernorm() const { return layernorm_; }

    VectorXd& params() { return params_; }
    [[nodiscard]] const VectorXd& params() const { return params_; }

    [[nodiscard]] Eigen::Map<const MatrixXd> weight(int layer) const;
    [[nodiscard]] Eigen::Map<const VectorXd> bias(int layer) const;
    Eigen::Map<MatrixXd> weight(int layer);
    Eigen::Map<VectorXd> bias(int layer);

  private:
    struct Offsets {
        Eigen::Index weight, bias, gain, shift;
    };

    std::vector<int> sizes_;
    bool layernorm_ = false;
    std::vector<Offsets> offsets_;
    VectorXd params_;
};

/// round(1.5 * dim(x)), at least 1.
int hidden_width_for(int input_dim);

inline constexpr int kHiddenLayers = 4;

struct AdamState {
    VectorXd m;
    VectorXd v;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_params(Eigen::Index n);
};

/// Bias-corrected Adam update in place.
void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state, double lr);

/// base_lr before 90% of total_steps, 0.1 * base_lr from there on.
double lr_schedule(double base_lr, std::int64_t step, std::int64_t total_steps);

}  // namespace scopf
