#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scopf/grid.hpp"
#include "scopf/sampler.hpp"

namespace scopf {

/// Oracle output attached to a record. `feasible == false` marks instances on
/// which some generator contingency cannot be balanced at any dispatch.
struct OracleLabel {
    bool feasible = false;
    VectorXd g_star;
    double obj_star = 0.0;
    double tol_certificate = 0.0;
};

struct Record {
    Instance inst;
    std::optional<OracleLabel> label;
};

struct Dataset {
    PerturbationConfig config;
    int n_gen = 0;
    int n_load = 0;
    std::uint64_t resamples = 0;
    std::vector<Record> records;

    [[nodiscard]] std::size_t size() const { return records.size(); }
    [[nodiscard]] bool fully_labeled() const;
};

/// Samples `n` instances of the stream described by `config`.
Dataset generate_dataset(const GridCase& grid, const PerturbationConfig& config, std::size_t n);

/// JSON-lines text: a header object followed by one object per record.
std::string dataset_to_text(const Dataset& data);
Dataset dataset_from_text(const GridCase& grid, const std::string& text);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const GridCase& grid, const std::filesystem::path& path);

/// 64-bit FNV-1a, used for manifest and config hashes.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace scopf
