#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scopf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Static DC network description. All power quantities are per-unit on
/// `base_mva`; bus, generator, line and load references are 0-based indices.
struct GridCase {
    int n_bus = 0;
    std::vector<int> bus_ids;  // external labels, index-aligned with buses

    std::vector<int> gen_bus;
    VectorXd glb;
    VectorXd gub0;
    VectorXd c0;     // base linear cost ($/p.u.)
    VectorXd gamma;  // droop participation

    std::vector<int> line_from;
    std::vector<int> line_to;
    VectorXd susceptance;
    VectorXd flb;
    VectorXd fub;

    std::vector<int> load_bus;
    VectorXd d0;

    int slack_bus = 0;
    double penalty_pi = 1500.0;
    double base_mva = 100.0;

    [[nodiscard]] int n_gen() const { return static_cast<int>(gen_bus.size()); }
    [[nodiscard]] int n_line() const { return static_cast<int>(line_from.size()); }
    [[nodiscard]] int n_load() const { return static_cast<int>(load_bus.size()); }

    // Checks structural invariants (sizes, index ranges, bounds, connectivity).
    // Throws DataError describing the first violation.
    void validate() const;
};

/// Parses the JSON case format (see README "Case file").
GridCase parse_case(const std::string& json_text);
GridCase load_case(const std::filesystem::path& path);
std::string case_to_json(const GridCase& grid);

/// Withdrawal-convention PTDF: f = ptdf * (d_bus - B g). The slack column is zero.
/// Throws DataError("disconnected network") when the reduced susceptance
/// matrix is singular.
MatrixXd build_ptdf(const GridCase& grid);

struct LodfResult {
    MatrixXd lodf;               // |E| x |E|, column k = redistribution for outage of k
    std::vector<bool> islanding;  // true when removing the line splits the grid
};

// Islanding columns are left zero except for the -1 diagonal.
inline constexpr double kIslandingTolerance = 1e-6;

LodfResult build_lodf(const GridCase& grid, const MatrixXd& ptdf);

/// |N| x |G| generator-to-bus incidence.
MatrixXd gen_incidence(const GridCase& grid);

/// Sums per-load-unit quantities onto buses.
VectorXd aggregate_loads(const GridCase& grid, const VectorXd& per_load);

struct ContingencySet {
    std::vector<int> gen;   // Kg, generator indices
    std::vector<int> line;  // Ke, line indices
};

ContingencySet screen_contingencies(const GridCase& grid, const LodfResult& lodf);

/// Case plus everything derived from it that the evaluators reuse.
/// Immutable after construction.
struct GridModel {
    GridCase grid;
    MatrixXd ptdf;         // |E| x |N|
    LodfResult lodf;       // full |E| x |E|
    MatrixXd incidence;    // |N| x |G|
    MatrixXd ptdf_gen;     // ptdf * incidence, |E| x |G|
    ContingencySet contingencies;

    explicit GridModel(GridCase c);

    [[nodiscard]] int n_gen() const { return grid.n_gen(); }
    [[nodiscard]] int n_line() const { return grid.n_line(); }
    [[nodiscard]] int n_load() const { return grid.n_load(); }
    [[nodiscard]] int n_gen_contingencies() const { return static_cast<int>(contingencies.gen.size()); }
    [[nodiscard]] int n_line_contingencies() const { return static_cast<int>(contingencies.line.size()); }
};

}  // namespace scopf
