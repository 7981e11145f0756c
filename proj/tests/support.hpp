#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scopf/grid.hpp"
#include "scopf/sampler.hpp"
#include "scopf/scopf.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(SCOPF_FIXTURE_DIR) / name;
}

inline scopf::GridCase load_fixture(const std::string& name) { return scopf::load_case(fixture(name)); }

/// Unperturbed instance of the case (all factors one, d = d0).
inline scopf::Instance base_instance(const scopf::GridCase& grid) {
    return scopf::assemble_instance(grid, grid.d0, Eigen::VectorXd::Ones(grid.n_gen()),
                                    Eigen::VectorXd::Ones(grid.n_gen()));
}

/// Minimal case builder: buses are 0-based, every field has a sane default.
struct CaseBuilder {
    scopf::GridCase g;

    explicit CaseBuilder(int n_bus, int slack = 0) {
        g.n_bus = n_bus;
        for (int i = 0; i < n_bus; ++i) g.bus_ids.push_back(i + 1);
        g.slack_bus = slack;
        g.glb.resize(0);
        g.gub0.resize(0);
        g.c0.resize(0);
        g.gamma.resize(0);
        g.susceptance.resize(0);
        g.flb.resize(0);
        g.fub.resize(0);
        g.d0.resize(0);
    }

    static void push(Eigen::VectorXd& v, double x) {
        v.conservativeResize(v.size() + 1);
        v[v.size() - 1] = x;
    }

    CaseBuilder& gen(int bus, double glb, double gub, double cost, double gamma) {
        g.gen_bus.push_back(bus);
        push(g.glb, glb);
        push(g.gub0, gub);
        push(g.c0, cost);
        push(g.gamma, gamma);
        return *this;
    }
    CaseBuilder& line(int from, int to, double b, double limit) {
        g.line_from.push_back(from);
        g.line_to.push_back(to);
        push(g.susceptance, b);
        push(g.flb, -limit);
        push(g.fub, limit);
        return *this;
    }
    CaseBuilder& load(int bus, double d0) {
        g.load_bus.push_back(bus);
        push(g.d0, d0);
        return *this;
    }
    scopf::GridCase build() const { return g; }
};

/// max|a - b| / max(max|a|, max|b|, floor)
inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-12) {
    const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace testing
