#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scopf/checkpoint.hpp"
#include "scopf/dataset.hpp"
#include "scopf/grid.hpp"
#include "scopf/train.hpp"

namespace scopf::cli {

/// Run configuration. Loaded from a JSON file, then overridden flag by flag.
struct RunConfig {
    std::string case_path;
    std::string method = "pdl";
    TrainerConfig trainer;
    PerturbationConfig sampler;
    std::size_t train_size = 500;
    std::size_t test_size = 100;
    double resolution = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);

/// Optional values collected from the command line. Every set field replaces
/// the matching config key.
struct Overrides {
    std::optional<std::string> case_path;
    std::optional<std::string> method;
    std::optional<int> K, L, batch, bisection_iterations;
    std::optional<double> lr, rho0, rho_max, tau, alpha, dual_loss_rho, obj_scale, ld_rho;
    std::optional<double> mu, load_corr, factor_corr, resolution;
    std::optional<std::size_t> train_size, test_size;
    std::optional<std::uint64_t> seed;
};

void apply(RunConfig& config, const Overrides& o);

struct EvalRow {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    double objective = 0.0;
    std::optional<double> oracle_objective;
    std::optional<double> gap_pct;
    double max_abs_h = 0.0;
    double max_eta_base = 0.0;
    double max_eta_gen = 0.0;
    double max_eta_line = 0.0;
    double infer_ms = 0.0;
};

struct EvalSummary {
    std::size_t instances = 0;
    std::size_t labeled = 0;
    double mean_objective = 0.0;
    std::optional<double> mean_gap_pct;
    std::optional<double> max_gap_pct;
    double max_abs_h = 0.0;
    double max_eta_base = 0.0;
    double max_eta_gen = 0.0;
    double max_eta_line = 0.0;
    double mean_infer_ms = 0.0;
    double max_infer_ms = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    EvalSummary summary;
};

/// Runs the primal network of `run` on every record. Records labeled
/// infeasible are reported without a gap.
EvalReport evaluate(const GridModel& model, const Mlp& primal, const Dataset& data,
                    int iterations = kDefaultBisectionIterations);

std::string report_to_csv(const EvalReport& report);
std::string summary_to_json(const EvalSummary& s);
/// Human-readable summary; `mva` scales power quantities by the base MVA.
void print_summary(std::ostream& os, const EvalSummary& s, double base_mva, bool mva);

// Subcommands. Each returns normally on success and throws ConfigError,
// DataError or DivergenceError otherwise.

struct GenArgs {
    RunConfig config;
    std::optional<std::size_t> n;
    std::filesystem::path out;
};
void cmd_gen(const GenArgs& args, std::ostream& log);

struct OracleArgs {
    RunConfig config;
    std::filesystem::path data;
    std::filesystem::path out;  // defaults to `data`
};
void cmd_oracle(const OracleArgs& args, std::ostream& log);

struct TrainArgs {
    RunConfig config;
    std::filesystem::path data;
    std::filesystem::path out_dir;
};
TrainResult cmd_train(const TrainArgs& args, std::ostream& log);

struct EvalArgs {
    RunConfig config;
    std::filesystem::path checkpoint;
    std::filesystem::path data;
    std::filesystem::path out;  // CSV report
    bool mva = false;
};
EvalReport cmd_eval(const EvalArgs& args, std::ostream& log);

struct InspectArgs {
    RunConfig config;
    std::optional<std::filesystem::path> data;
    bool mva = false;
};
void cmd_inspect(const InspectArgs& args, std::ostream& out);

/// Maps an exception to the documented exit code (2 config, 3 data, 4 divergence, 1 other).
int exit_code_for(const std::exception& e);

}  // namespace scopf::cli
