#include "scopf/grid.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scopf/error.hpp"

namespace scopf {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

double limit_or(const json& obj, const char* key, double fallback) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    return it->get<double>();
}

json limit_to_json(double v) {
    if (std::isinf(v)) return nullptr;
    return v;
}

}  // namespace

void GridCase::validate() const {
    auto fail = [](const std::string& what) { throw DataError("invalid case: " + what); };
    if (n_bus < 1) fail("no buses");
    if (static_cast<int>(bus_ids.size()) != n_bus) fail("bus id list size mismatch");
    const auto ng = static_cast<Eigen::Index>(gen_bus.size());
    if (glb.size() != ng || gub0.size() != ng || c0.size() != ng || gamma.size() != ng)
        fail("generator field sizes differ");
    const auto nl = static_cast<Eigen::Index>(line_from.size());
    if (static_cast<Eigen::Index>(line_to.size()) != nl || susceptance.size() != nl || flb.size() != nl ||
        fub.size() != nl)
        fail("line field sizes differ");
    if (d0.size() != static_cast<Eigen::Index>(load_bus.size())) fail("load field sizes differ");
    if (ng < 1) fail("no generators");

    auto in_range = [&](int b) { return b >= 0 && b < n_bus; };
    for (int b : gen_bus)
        if (!in_range(b)) fail("generator bus out of range");
    for (int b : load_bus)
        if (!in_range(b)) fail("load bus out of range");
    for (Eigen::Index l = 0; l < nl; ++l) {
        if (!in_range(line_from[l]) || !in_range(line_to[l])) fail("line endpoint out of range");
        if (line_from[l] == line_to[l]) fail("line " + std::to_string(l) + " is a self loop");
        if (!(susceptance[l] > 0)) fail("line " + std::to_string(l) + " has non-positive susceptance");
        if (!(flb[l] <= 0 && fub[l] >= 0)) fail("line " + std::to_string(l) + " limits do not span zero");
    }
    for (Eigen::Index i = 0; i < ng; ++i) {
        if (!(glb[i] <= gub0[i])) fail("generator " + std::to_string(i) + " has glb > gub");
        if (!(gamma[i] >= 0)) fail("generator " + std::to_string(i) + " has negative gamma");
    }
    if (!in_range(slack_bus)) fail("slack bus out of range");
    if (!(penalty_pi > 0)) fail("penalty_Pi must be positive");
    if (!(base_mva > 0)) fail("base_mva must be positive");
}

GridCase parse_case(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("case file is not valid JSON: ") + e.what());
    }

    GridCase grid;
    try {
        std::map<int, int> index_of;
        for (const auto& b : doc.at("buses")) {
            const int id = b.is_object() ? b.at("id").get<int>() : b.get<int>();
            if (!index_of.emplace(id, static_cast<int>(grid.bus_ids.size())).second)
                throw DataError("duplicate bus id " + std::to_string(id));
            grid.bus_ids.push_back(id);
        }
        grid.n_bus = static_cast<int>(grid.bus_ids.size());
        auto bus = [&](int id) {
            auto it = index_of.find(id);
            if (it == index_of.end()) throw DataError("unknown bus id " + std::to_string(id));
            return it->second;
        };

        const auto& gens = doc.at("generators");
        const auto ng = static_cast<Eigen::Index>(gens.size());
        grid.glb.resize(ng);
        grid.gub0.resize(ng);
        grid.c0.resize(ng);
        grid.gamma.resize(ng);
        for (Eigen::Index i = 0; i < ng; ++i) {
            const auto& g = gens[static_cast<std::size_t>(i)];
            grid.gen_bus.push_back(bus(g.at("bus").get<int>()));
            grid.glb[i] = g.at("glb").get<double>();
            grid.gub0[i] = g.at("gub").get<double>();
            grid.c0[i] = g.at("cost").get<double>();
            grid.gamma[i] = g.at("gamma").get<double>();
        }

        const auto& lines = doc.at("lines");
        const auto nl = static_cast<Eigen::Index>(lines.size());
        grid.susceptance.resize(nl);
        grid.flb.resize(nl);
        grid.fub.resize(nl);
        for (Eigen::Index l = 0; l < nl; ++l) {
            const auto& ln = lines[static_cast<std::size_t>(l)];
            grid.line_from.push_back(bus(ln.at("from").get<int>()));
            grid.line_to.push_back(bus(ln.at("to").get<int>()));
            grid.susceptance[l] = ln.at("susceptance").get<double>();
            grid.flb[l] = limit_or(ln, "flb", -kInf);
            grid.fub[l] = limit_or(ln, "fub", kInf);
        }

        const auto& loads = doc.at("loads");
        grid.d0.resize(static_cast<Eigen::Index>(loads.size()));
        for (std::size_t j = 0; j < loads.size(); ++j) {
            grid.load_bus.push_back(bus(loads[j].at("bus").get<int>()));
            grid.d0[static_cast<Eigen::Index>(j)] = loads[j].at("d0").get<double>();
        }

        grid.slack_bus = bus(doc.at("slack_bus").get<int>());
        grid.penalty_pi = doc.value("penalty_Pi", 1500.0);
        grid.base_mva = doc.value("base_mva", 100.0);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed case file: ") + e.what());
    }
    grid.validate();
    return grid;
}

GridCase load_case(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open case file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_case(buf.str());
}

std::string case_to_json(const GridCase& grid) {
    json doc;
    doc["base_mva"] = grid.base_mva;
    doc["penalty_Pi"] = grid.penalty_pi;
    doc["slack_bus"] = grid.bus_ids[static_cast<std::size_t>(grid.slack_bus)];
    doc["buses"] = grid.bus_ids;
    auto id = [&](int b) { return grid.bus_ids[static_cast<std::size_t>(b)]; };
    for (int i = 0; i < grid.n_gen(); ++i)
        doc["generators"].push_back({{"bus", id(grid.gen_bus[i])},
                                     {"glb", grid.glb[i]},
                                     {"gub", grid.gub0[i]},
                                     {"cost", grid.c0[i]},
                                     {"gamma", grid.gamma[i]}});
    for (int l = 0; l < grid.n_line(); ++l)
        doc["lines"].push_back({{"from", id(grid.line_from[l])},
                                {"to", id(grid.line_to[l])},
                                {"susceptance", grid.susceptance[l]},
                                {"flb", limit_to_json(grid.flb[l])},
                                {"fub", limit_to_json(grid.fub[l])}});
    doc["loads"] = json::array();
    for (int j = 0; j < grid.n_load(); ++j) doc["loads"].push_back({{"bus", id(grid.load_bus[j])}, {"d0", grid.d0[j]}});
    return doc.dump(2);
}

MatrixXd build_ptdf(const GridCase& grid) {
    const int n = grid.n_bus;
    const int ne = grid.n_line();
    if (grid.slack_bus < 0 || grid.slack_bus >= n) throw ConfigError("slack bus out of range");

    // Reduced index: every bus except the slack.
    std::vector<int> reduced(static_cast<std::size_t>(n), -1);
    for (int b = 0, r = 0; b < n; ++b)
        if (b != grid.slack_bus) reduced[static_cast<std::size_t>(b)] = r++;

    MatrixXd ptdf = MatrixXd::Zero(ne, n);
    if (n == 1) return ptdf;

    MatrixXd bred = MatrixXd::Zero(n - 1, n - 1);
    MatrixXd bf_red = MatrixXd::Zero(ne, n - 1);
    for (int l = 0; l < ne; ++l) {
        const int f = reduced[static_cast<std::size_t>(grid.line_from[l])];
        const int t = reduced[static_cast<std::size_t>(grid.line_to[l])];
        const double b = grid.susceptance[l];
        if (f >= 0) {
            bred(f, f) += b;
            bf_red(l, f) += b;
        }
        if (t >= 0) {
            bred(t, t) += b;
            bf_red(l, t) -= b;
        }
        if (f >= 0 && t >= 0) {
            bred(f, t) -= b;
            bred(t, f) -= b;
        }
    }

    Eigen::PartialPivLU<MatrixXd> lu(bred);
    const double pivot_ratio = n > 1 ? lu.matrixLU().diagonal().cwiseAbs().minCoeff() / bred.cwiseAbs().maxCoeff() : 1.0;
    if (!(pivot_ratio > 1e-12) || !(lu.rcond() > 1e-12)) throw DataError("disconnected network");

    // Injection-convention sensitivities are bf_red * bred^{-1}; bred is symmetric.
    const MatrixXd inj = lu.solve(bf_red.transpose()).transpose();
    for (int b = 0; b < n; ++b) {
        const int r = reduced[static_cast<std::size_t>(b)];
        if (r >= 0) ptdf.col(b) = -inj.col(r);
    }
    return ptdf;
}

LodfResult build_lodf(const GridCase& grid, const MatrixXd& ptdf) {
    const int ne = grid.n_line();
    LodfResult out{MatrixXd::Zero(ne, ne), std::vector<bool>(static_cast<std::size_t>(ne), false)};
    for (int k = 0; k < ne; ++k) {
        // Flow response to a unit transfer injected at from_k and withdrawn at to_k.
        const VectorXd transfer = ptdf.col(grid.line_to[k]) - ptdf.col(grid.line_from[k]);
        const double denom = 1.0 - transfer[k];
        if (std::abs(denom) < kIslandingTolerance) {
            out.islanding[static_cast<std::size_t>(k)] = true;
        } else {
            out.lodf.col(k) = transfer / denom;
        }
        out.lodf(k, k) = -1.0;
    }
    return out;
}

MatrixXd gen_incidence(const GridCase& grid) {
    MatrixXd inc = MatrixXd::Zero(grid.n_bus, grid.n_gen());
    for (int i = 0; i < grid.n_gen(); ++i) inc(grid.gen_bus[i], i) = 1.0;
    return inc;
}

VectorXd aggregate_loads(const GridCase& grid, const VectorXd& per_load) {
    VectorXd d_bus = VectorXd::Zero(grid.n_bus);
    for (int j = 0; j < grid.n_load(); ++j) d_bus[grid.load_bus[j]] += per_load[j];
    return d_bus;
}

ContingencySet screen_contingencies(const GridCase& grid, const LodfResult& lodf) {
    ContingencySet set;
    for (int i = 0; i < grid.n_gen(); ++i) {
        const double capacity = grid.gub0[i] - grid.glb[i];
        if (capacity > 0 && grid.glb[i] >= 0) set.gen.push_back(i);
    }
    for (int l = 0; l < grid.n_line(); ++l)
        if (!lodf.islanding[static_cast<std::size_t>(l)]) set.line.push_back(l);
    return set;
}

namespace {
GridCase validated(GridCase c) {
    c.validate();
    return c;
}
}  // namespace

GridModel::GridModel(GridCase c)
    : grid(validated(std::move(c))),
      ptdf(build_ptdf(grid)),
      lodf(build_lodf(grid, ptdf)),
      incidence(gen_incidence(grid)),
      ptdf_gen(ptdf * incidence),
      contingencies(screen_contingencies(grid, lodf)) {}

}  // namespace scopf
