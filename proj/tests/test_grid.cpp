#include <doctest.h>

#include <random>

#include "reference.hpp"
#include "scopf/error.hpp"
#include "scopf/grid.hpp"
#include "support.hpp"

using namespace scopf;
using testing::CaseBuilder;

namespace {

GridCase triangle(double limit = 1.0) {
    return CaseBuilder(3)
        .gen(0, 0.0, 2.0, 1.0, 1.0)
        .line(0, 1, 1.0, limit)
        .line(0, 2, 1.0, limit)
        .line(1, 2, 1.0, limit)
        .load(2, 1.0)
        .build();
}

GridCase two_bus() { return CaseBuilder(2).gen(0, 0.0, 2.0, 1.0, 0.5).line(0, 1, 5.0, 1.0).load(1, 1.0).build(); }

}  // namespace

TEST_SUITE("grid") {
    TEST_CASE("two-bus ptdf is [0, 1] and carries the load") {
        const GridModel m(two_bus());
        CHECK(m.ptdf.rows() == 1);
        CHECK(m.ptdf(0, 0) == 0.0);
        CHECK(m.ptdf(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
        Eigen::VectorXd d_bus(2), g(1);
        d_bus << 0.0, 1.0;
        g << 1.0;
        const VectorXd f = m.ptdf * (d_bus - m.incidence * g);
        CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("triangle ptdf column for a withdrawal at bus 2") {
        const GridModel m(triangle());
        CHECK(m.ptdf(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(m.ptdf(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(m.ptdf(2, 1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
    }

    TEST_CASE("zero withdrawal gives zero flows") {
        const GridModel m(triangle());
        CHECK((m.ptdf * Eigen::VectorXd::Zero(3)).cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("slack column is exactly zero") {
        std::mt19937_64 rng(7);
        for (int t = 0; t < 20; ++t) {
            const GridCase g = ref::random_grid(2 + t % 9, t % 4, rng);
            const MatrixXd ptdf = build_ptdf(g);
            CHECK(ptdf.col(g.slack_bus).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    TEST_CASE("triangle lodf for the outage of line (1,2)") {
        const GridModel m(triangle());
        CHECK(m.lodf.lodf(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.lodf.lodf(2, 0) == doctest::Approx(-1.0).epsilon(1e-12));
        for (int k = 0; k < 3; ++k) CHECK(m.lodf.lodf(k, k) == -1.0);
        CHECK(m.contingencies.line == std::vector<int>{0, 1, 2});
    }

    TEST_CASE("radial line is flagged islanding and screened out") {
        const GridModel m(two_bus());
        CHECK(m.lodf.islanding[0]);
        CHECK(m.contingencies.line.empty());
    }

    TEST_CASE("disconnected network is rejected") {
        GridCase g = CaseBuilder(3).gen(0, 0.0, 1.0, 1.0, 1.0).line(0, 1, 1.0, 1.0).load(1, 0.5).build();
        CHECK_THROWS_WITH_AS(build_ptdf(g), doctest::Contains("disconnected network"), DataError);
    }

    TEST_CASE("generator screening excludes zero capacity and negative lower bounds") {
        GridCase g = CaseBuilder(3)
                         .gen(0, 0.0, 2.0, 1.0, 1.0)
                         .gen(1, 0.5, 0.5, 1.0, 1.0)
                         .gen(2, -0.1, 1.0, 1.0, 1.0)
                         .gen(2, 0.1, 1.0, 1.0, 1.0)
                         .line(0, 1, 1.0, 1.0)
                         .line(0, 2, 1.0, 1.0)
                         .line(1, 2, 1.0, 1.0)
                         .load(2, 1.0)
                         .build();
        const GridModel m(g);
        CHECK(m.contingencies.gen == std::vector<int>{0, 3});
    }

    TEST_CASE("bridge in a radial spur is excluded from line contingencies") {
        GridCase g = triangle();
        g.n_bus = 4;
        g.bus_ids.push_back(4);
        CaseBuilder::push(g.susceptance, 3.0);
        CaseBuilder::push(g.flb, -1.0);
        CaseBuilder::push(g.fub, 1.0);
        g.line_from.push_back(2);
        g.line_to.push_back(3);
        const GridModel m(g);
        CHECK(m.lodf.islanding == std::vector<bool>{false, false, false, true});
        CHECK(m.contingencies.line == std::vector<int>{0, 1, 2});
    }

    TEST_CASE("ptdf agrees with an independent elimination solve") {
        std::mt19937_64 rng(11);
        for (int t = 0; t < 40; ++t) {
            const GridCase g = ref::random_grid(2 + t % 9, t % 5, rng);
            const MatrixXd ptdf = build_ptdf(g);
            const auto expect = ref::ptdf(g);
            for (int l = 0; l < g.n_line(); ++l)
                for (int j = 0; j < g.n_bus; ++j)
                    CHECK(std::abs(ptdf(l, j) - expect[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)]) <=
                          1e-10);
        }
    }

    TEST_CASE("flows satisfy KCL at every non-slack bus") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n01;
        double worst = 0.0;
        for (int t = 0; t < 200; ++t) {
            const GridCase g = ref::random_grid(2 + t % 9, t % 6, rng);
            const MatrixXd ptdf = build_ptdf(g);
            VectorXd w(g.n_bus);
            for (int i = 0; i < g.n_bus; ++i) w[i] = n01(rng);
            w[g.slack_bus] -= w.sum();
            const VectorXd f = ptdf * w;
            VectorXd net = w;  // withdrawal + outflow must vanish
            for (int l = 0; l < g.n_line(); ++l) {
                net[g.line_from[static_cast<std::size_t>(l)]] += f[l];
                net[g.line_to[static_cast<std::size_t>(l)]] -= f[l];
            }
            for (int i = 0; i < g.n_bus; ++i)
                if (i != g.slack_bus) worst = std::max(worst, std::abs(net[i]));
        }
        CHECK(worst <= 1e-9);
    }

    TEST_CASE("lodf reproduces post-outage flows and islanding matches BFS bridges") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n01;
        double worst = 0.0;
        for (int t = 0; t < 200; ++t) {
            const GridCase g = ref::random_grid(2 + t % 9, t % 6, rng);
            const MatrixXd ptdf = build_ptdf(g);
            const LodfResult lodf = build_lodf(g, ptdf);
            const ContingencySet cs = screen_contingencies(g, lodf);
            ref::Vec w(static_cast<std::size_t>(g.n_bus));
            double sum = 0.0;
            for (auto& v : w) sum += (v = n01(rng));
            w[static_cast<std::size_t>(g.slack_bus)] -= sum;
            const VectorXd f = ptdf * Eigen::Map<const VectorXd>(w.data(), g.n_bus);
            std::vector<int> expect_ke;
            for (int k = 0; k < g.n_line(); ++k) {
                CHECK(lodf.islanding[static_cast<std::size_t>(k)] == ref::is_bridge(g, k));
                if (!ref::is_bridge(g, k)) expect_ke.push_back(k);
            }
            CHECK(cs.line == expect_ke);
            for (int k : cs.line) {
                CHECK(lodf.lodf(k, k) == -1.0);
                const VectorXd post = f + f[k] * lodf.lodf.col(k);
                const ref::Vec expect = ref::dc_flows(g, w, k);
                for (int l = 0; l < g.n_line(); ++l)
                    worst = std::max(worst, std::abs(post[l] - expect[static_cast<std::size_t>(l)]));
            }
        }
        CHECK(worst <= 1e-8);
    }

    TEST_CASE("case json round-trips") {
        const GridCase g = testing::load_fixture("bus5_3gen.json");
        const GridCase back = parse_case(case_to_json(g));
        CHECK(back.n_bus == g.n_bus);
        CHECK(back.gen_bus == g.gen_bus);
        CHECK(back.line_from == g.line_from);
        CHECK(back.fub == g.fub);
        CHECK(back.gub0 == g.gub0);
        CHECK(back.d0 == g.d0);
        CHECK(back.slack_bus == g.slack_bus);
    }

    TEST_CASE("malformed case files raise DataError") {
        CHECK_THROWS_AS(parse_case("{not json"), DataError);
        CHECK_THROWS_AS(parse_case(R"({"buses": [1]})"), DataError);
        CHECK_THROWS_AS(parse_case(R"({"buses":[1,2],"slack_bus":1,
            "generators":[{"bus":1,"glb":0,"gub":1,"cost":1,"gamma":1}],
            "lines":[{"from":1,"to":2,"susceptance":-1,"flb":-1,"fub":1}],
            "loads":[{"bus":2,"d0":0.5}]})"),
                        DataError);
    }

    TEST_CASE("null flow limits mean unlimited") {
        const GridCase g = parse_case(R"({"buses":[1,2],"slack_bus":1,
            "generators":[{"bus":1,"glb":0,"gub":1,"cost":1,"gamma":1}],
            "lines":[{"from":1,"to":2,"susceptance":4,"flb":null,"fub":null}],
            "loads":[{"bus":2,"d0":0.5}]})");
        CHECK(std::isinf(g.fub[0]));
        CHECK(std::isinf(g.flb[0]));
        CHECK(g.fub[0] > 0);
        CHECK(g.flb[0] < 0);
    }
}
