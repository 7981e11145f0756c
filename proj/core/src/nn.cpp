#include "scopf/nn.hpp"

#include <cmath>

#include "scopf/error.hpp"

namespace scopf {

Mlp::Mlp(std::vector<int> sizes, bool layernorm) : sizes_(std::move(sizes)), layernorm_(layernorm) {
    if (sizes_.size() < 2) throw ConfigError("an MLP needs at least an input and an output size");
    for (int s : sizes_)
        if (s < 1) throw ConfigError("MLP layer sizes must be positive");
    Eigen::Index off = 0;
    for (int l = 0; l < layers(); ++l) {
        const Eigen::Index in = sizes_[static_cast<std::size_t>(l)];
        const Eigen::Index out = sizes_[static_cast<std::size_t>(l) + 1];
        Offsets o{};
        if (layernorm_) {
            o.gain = off;
            o.shift = off + in;
            off += 2 * in;
        } else {
            o.gain = o.shift = -1;
        }
        o.weight = off;
        off += in * out;
        o.bias = off;
        off += out;
        offsets_.push_back(o);
    }
    params_ = VectorXd::Zero(off);
    for (const auto& o : offsets_)
        if (o.gain >= 0) params_.segment(o.gain, o.shift - o.gain).setOnes();
}

Mlp Mlp::make(int inputs, int outputs, int width, int hidden_layers, bool layernorm) {
    std::vector<int> sizes{inputs};
    for (int i = 0; i < hidden_layers; ++i) sizes.push_back(width);
    sizes.push_back(outputs);
    return Mlp(std::move(sizes), layernorm);
}

void Mlp::init(Rng& rng, double output_scale) {
    for (int l = 0; l < layers(); ++l) {
        const int in = sizes_[static_cast<std::size_t>(l)];
        const double limit = std::sqrt(6.0 / in) * (l + 1 == layers() ? output_scale : 1.0);
        std::uniform_real_distribution<double> dist(-limit, limit);
        auto w = weight(l);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
        bias(l).setZero();
    }
}

Eigen::Map<const MatrixXd> Mlp::weight(int l) const {
    const auto& o = offsets_[static_cast<std::size_t>(l)];
    return {params_.data() + o.weight, sizes_[static_cast<std::size_t>(l) + 1], sizes_[static_cast<std::size_t>(l)]};
}

Eigen::Map<const VectorXd> Mlp::bias(int l) const {
    const auto& o = offsets_[static_cast<std::size_t>(l)];
    return {params_.data() + o.bias, sizes_[static_cast<std::size_t>(l) + 1]};
}

Eigen::Map<MatrixXd> Mlp::weight(int l) {
    const auto& o = offsets_[static_cast<std::size_t>(l)];
    return {params_.data() + o.weight, sizes_[static_cast<std::size_t>(l) + 1], sizes_[static_cast<std::size_t>(l)]};
}

Eigen::Map<VectorXd> Mlp::bias(int l) {
    const auto& o = offsets_[static_cast<std::size_t>(l)];
    return {params_.data() + o.bias, sizes_[static_cast<std::size_t>(l) + 1]};
}

MatrixXd Mlp::forward(const MatrixXd& x, Tape* tape) const {
    if (x.rows() != inputs())
        throw ConfigError("MLP input has " + std::to_string(x.rows()) + " rows, expected " +
                          std::to_string(inputs()));
    if (tape) *tape = Tape{};
    MatrixXd a = x;
    for (int l = 0; l < layers(); ++l) {
        const auto& o = offsets_[static_cast<std::size_t>(l)];
        const Eigen::Index in = a.rows();
        MatrixXd u;
        Eigen::RowVectorXd inv_std;
        MatrixXd xhat;
        if (o.gain >= 0) {
            const Eigen::RowVectorXd mean = a.colwise().mean();
            const MatrixXd centered = a.rowwise() - mean;
            const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / static_cast<double>(in);
            inv_std = (var.array() + kLayerNormEps).rsqrt();
            xhat = centered.array().rowwise() * inv_std.array();
            const Eigen::Map<const VectorXd> gain(params_.data() + o.gain, in);
            const Eigen::Map<const VectorXd> shift(params_.data() + o.shift, in);
            u = (xhat.array().colwise() * gain.array()).colwise() + shift.array();
        } else {
            u = a;
        }
        MatrixXd pre = (weight(l) * u).colwise() + bias(l);
        MatrixXd next = (l + 1 < layers()) ? MatrixXd(pre.cwiseMax(0.0)) : pre;
        if (tape) {
            tape->input.push_back(std::move(a));
            tape->xhat.push_back(std::move(xhat));
            tape->inv_std.push_back(std::move(inv_std));
            tape->affine_in.push_back(std::move(u));
            tape->pre.push_back(std::move(pre));
        }
        a = std::move(next);
    }
    return a;
}

VectorXd Mlp::forward(const VectorXd& x) const {
    return forward(MatrixXd(x)).col(0);
}

Mlp::Gradient Mlp::backward(const Tape& tape, const MatrixXd& grad_out) const {
    Gradient g{VectorXd::Zero(params_.size()), MatrixXd()};
    MatrixXd delta = grad_out;
    for (int l = layers() - 1; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        const auto& o = offsets_[li];
        if (l + 1 < layers()) delta = delta.cwiseProduct((tape.pre[li].array() > 0.0).cast<double>().matrix());
        const Eigen::Index in = sizes_[li];
        const Eigen::Index out = sizes_[li + 1];
        Eigen::Map<MatrixXd>(g.params.data() + o.weight, out, in) = delta * tape.affine_in[li].transpose();
        Eigen::Map<VectorXd>(g.params.data() + o.bias, out) = delta.rowwise().sum();
        MatrixXd du = weight(l).transpose() * delta;
        if (o.gain >= 0) {
            const auto& xhat = tape.xhat[li];
            const Eigen::Map<const VectorXd> gain(params_.data() + o.gain, in);
            Eigen::Map<VectorXd>(g.params.data() + o.gain, in) = du.cwiseProduct(xhat).rowwise().sum();
            Eigen::Map<VectorXd>(g.params.data() + o.shift, in) = du.rowwise().sum();
            const MatrixXd dxhat = du.array().colwise() * gain.array();
            const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
            const Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
            const double n = static_cast<double>(in);
            MatrixXd da = (n * dxhat.array()).matrix();
            da.rowwise() -= sum_d;
            da -= (xhat.array().rowwise() * sum_dx.array()).matrix();
            da = (da.array().rowwise() * (tape.inv_std[li].array() / n)).matrix();
            delta = std::move(da);
        } else {
            delta = std::move(du);
        }
    }
    g.input = std::move(delta);
    return g;
}

int hidden_width_for(int input_dim) {
    return std::max(1, static_cast<int>(std::lround(1.5 * input_dim)));
}

AdamState AdamState::for_params(Eigen::Index n) {
    AdamState s;
    s.m = VectorXd::Zero(n);
    s.v = VectorXd::Zero(n);
    return s;
}

void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state, double lr) {
    if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw ConfigError("adam_step: parameter, gradient and state sizes differ");
    ++state.step;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

double lr_schedule(double base_lr, std::int64_t step, std::int64_t total_steps) {
    if (step < 0 || step > total_steps) throw ConfigError("lr_schedule: step outside [0, total_steps]");
    return (10 * step >= 9 * total_steps) ? 0.1 * base_lr : base_lr;
}

}  // namespace scopf
