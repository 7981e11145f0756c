#include "scopf/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scopf/error.hpp"

namespace scopf {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "scopf-dataset";
constexpr int kVersion = 1;

json vec_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vec_from_json(const json& j, Eigen::Index expected, const char* what) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != expected)
        throw DataError(std::string("dataset field '") + what + "' has length " + std::to_string(values.size()) +
                        ", expected " + std::to_string(expected));
    return Eigen::Map<const VectorXd>(values.data(), expected);
}

}  // namespace

bool Dataset::fully_labeled() const {
    for (const auto& r : records)
        if (!r.label) return false;
    return !records.empty();
}

Dataset generate_dataset(const GridCase& grid, const PerturbationConfig& config, std::size_t n) {
    config.validate();
    Dataset data;
    data.config = config;
    data.n_gen = grid.n_gen();
    data.n_load = grid.n_load();
    data.records.reserve(n);
    SampleStats stats;
    for (std::size_t i = 0; i < n; ++i) data.records.push_back({sample_feasible_instance(grid, config, i, &stats), {}});
    data.resamples = stats.resamples;
    return data;
}

std::string dataset_to_text(const Dataset& data) {
    std::ostringstream out;
    const json header = {{"format", kFormat},
                         {"version", kVersion},
                         {"n_gen", data.n_gen},
                         {"n_load", data.n_load},
                         {"records", data.records.size()},
                         {"resamples", data.resamples},
                         {"config",
                          {{"mu", data.config.mu},
                           {"load_corr", data.config.load_corr},
                           {"factor_corr", data.config.factor_corr},
                           {"seed", data.config.seed},
                           {"z95", data.config.z95}}}};
    out << header.dump() << '\n';
    for (const auto& r : data.records) {
        json rec = {{"seed", r.inst.seed}, {"d", vec_to_json(r.inst.d)}, {"c", vec_to_json(r.inst.c)},
                    {"gub", vec_to_json(r.inst.gub)}};
        if (r.label) {
            rec["feasible"] = r.label->feasible;
            if (r.label->feasible) {
                rec["g_star"] = vec_to_json(r.label->g_star);
                rec["obj_star"] = r.label->obj_star;
                rec["tol_certificate"] = r.label->tol_certificate;
            }
        }
        out << rec.dump() << '\n';
    }
    return out.str();
}

Dataset dataset_from_text(const GridCase& grid, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset is empty");
    Dataset data;
    try {
        const json header = json::parse(line);
        if (header.value("format", "") != kFormat) throw DataError("not a scopf dataset (bad format tag)");
        if (header.value("version", 0) != kVersion)
            throw DataError("unsupported dataset version " + header.at("version").dump());
        data.n_gen = header.at("n_gen").get<int>();
        data.n_load = header.at("n_load").get<int>();
        data.resamples = header.value("resamples", std::uint64_t{0});
        const auto& cfg = header.at("config");
        data.config.mu = cfg.at("mu").get<double>();
        data.config.load_corr = cfg.at("load_corr").get<double>();
        data.config.factor_corr = cfg.at("factor_corr").get<double>();
        data.config.seed = cfg.at("seed").get<std::uint64_t>();
        data.config.z95 = cfg.at("z95").get<double>();
        if (data.n_gen != grid.n_gen() || data.n_load != grid.n_load())
            throw DataError("dataset dimensions (|G|=" + std::to_string(data.n_gen) +
                            ", |L|=" + std::to_string(data.n_load) + ") do not match case (|G|=" +
                            std::to_string(grid.n_gen()) + ", |L|=" + std::to_string(grid.n_load()) + ")");

        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json rec = json::parse(line);
            Record r;
            r.inst.seed = rec.at("seed").get<std::uint64_t>();
            r.inst.d = vec_from_json(rec.at("d"), data.n_load, "d");
            r.inst.c = vec_from_json(rec.at("c"), data.n_gen, "c");
            r.inst.gub = vec_from_json(rec.at("gub"), data.n_gen, "gub");
            r.inst.x = input_vector(grid, r.inst.d, r.inst.c, r.inst.gub);
            if (rec.contains("feasible")) {
                OracleLabel label;
                label.feasible = rec.at("feasible").get<bool>();
                if (label.feasible) {
                    label.g_star = vec_from_json(rec.at("g_star"), data.n_gen, "g_star");
                    label.obj_star = rec.at("obj_star").get<double>();
                    label.tol_certificate = rec.at("tol_certificate").get<double>();
                }
                r.label = std::move(label);
            }
            data.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed dataset: ") + e.what());
    }
    return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset to " + path.string());
    out << dataset_to_text(data);
    if (!out) throw DataError("failed writing dataset to " + path.string());
}

Dataset load_dataset(const GridCase& grid, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return dataset_from_text(grid, buf.str());
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace scopf
