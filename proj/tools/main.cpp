#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using scopf::cli::Overrides;

void add_case_flags(CLI::App* app, Overrides& o, std::string& config_path) {
    app->add_option("--config", config_path, "JSON run configuration");
    app->add_option("--case", o.case_path, "Case file (JSON)");
    app->add_option("--seed", o.seed, "Master seed");
}

void add_sampler_flags(CLI::App* app, Overrides& o) {
    app->add_option("--mu", o.mu, "Maximum relative load deviation");
    app->add_option("--load-corr", o.load_corr, "Correlation between load units");
    app->add_option("--factor-corr", o.factor_corr, "Correlation of cost and bound factors");
}

void add_trainer_flags(CLI::App* app, Overrides& o) {
    app->add_option("--method", o.method, "pdl, penalty, naive or ld");
    app->add_option("--K", o.K, "Outer iterations");
    app->add_option("--L", o.L, "Inner iterations");
    app->add_option("--batch", o.batch, "Minibatch size");
    app->add_option("--lr", o.lr, "Learning rate");
    app->add_option("--rho0", o.rho0, "Initial penalty coefficient");
    app->add_option("--rho-max", o.rho_max, "Penalty cap");
    app->add_option("--tau", o.tau, "Violation improvement ratio");
    app->add_option("--alpha", o.alpha, "Penalty growth factor");
    app->add_option("--dual-rho", o.dual_loss_rho, "Dual update step");
    app->add_option("--obj-scale", o.obj_scale, "Objective divisor");
    app->add_option("--ld-rho", o.ld_rho, "LD baseline penalty");
    app->add_option("--bisection", o.bisection_iterations, "Binary search iterations");
}

scopf::cli::RunConfig resolve(const std::string& config_path, const Overrides& o) {
    scopf::cli::RunConfig config = config_path.empty() ? scopf::cli::RunConfig{} : scopf::cli::load_config(config_path);
    scopf::cli::apply(config, o);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned dispatch for DC security-constrained optimal power flow"};
    app.require_subcommand(1);

    Overrides o;
    std::string config_path, data, out, checkpoint;
    std::optional<std::size_t> n;
    bool mva = false;

    auto* gen = app.add_subcommand("gen", "Sample a dataset of perturbed instances");
    add_case_flags(gen, o, config_path);
    add_sampler_flags(gen, o);
    gen->add_option("--n", n, "Number of instances (default: train_size)");
    gen->add_option("--train-size", o.train_size, "Default instance count");
    gen->add_option("--out", out, "Dataset file")->required();

    auto* oracle = app.add_subcommand("oracle", "Label a dataset with the enumeration oracle");
    add_case_flags(oracle, o, config_path);
    oracle->add_option("--data", data, "Dataset file")->required();
    oracle->add_option("--resolution", o.resolution, "Lattice spacing (p.u.)");
    oracle->add_option("--out", out, "Labeled dataset (default: overwrite --data)");

    auto* train = app.add_subcommand("train", "Train a primal network");
    add_case_flags(train, o, config_path);
    add_trainer_flags(train, o);
    train->add_option("--data", data, "Training dataset")->required();
    train->add_option("--out", out, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    add_case_flags(eval, o, config_path);
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    eval->add_option("--data", data, "Dataset file")->required();
    eval->add_option("--out", out, "CSV report");
    eval->add_flag("--mva", mva, "Display power quantities in MW");

    auto* inspect = app.add_subcommand("inspect", "Print case and dataset statistics");
    add_case_flags(inspect, o, config_path);
    inspect->add_option("--data", data, "Dataset file");
    inspect->add_flag("--mva", mva, "Display power quantities in MW");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto config = resolve(config_path, o);
        if (gen->parsed()) {
            scopf::cli::cmd_gen({config, n, out}, std::cerr);
        } else if (oracle->parsed()) {
            scopf::cli::cmd_oracle({config, data, out}, std::cerr);
        } else if (train->parsed()) {
            scopf::cli::cmd_train({config, data, out}, std::cerr);
        } else if (eval->parsed()) {
            scopf::cli::cmd_eval({config, checkpoint, data, out, mva}, std::cout);
        } else if (inspect->parsed()) {
            std::optional<std::filesystem::path> d;
            if (!data.empty()) d = data;
            scopf::cli::cmd_inspect({config, d, mva}, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return scopf::cli::exit_code_for(e);
    }
    return 0;
}
