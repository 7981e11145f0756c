#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "reference.hpp"
#include "scopf/layers.hpp"
#include "scopf/scopf.hpp"
#include "support.hpp"

using namespace scopf;
using testing::CaseBuilder;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

VectorXd ref_slack(const GridCase& g, const ref::Vec& f, int skip = -1) {
    VectorXd eta = VectorXd::Zero(g.n_line());
    for (int l = 0; l < g.n_line(); ++l) {
        if (l == skip) continue;
        const double v = f[static_cast<std::size_t>(l)];
        eta[l] = std::max({0.0, v - g.fub[l], g.flb[l] - v});
    }
    return eta;
}

ref::Vec withdrawal(const GridCase& g, const PreparedInstance& p, const VectorXd& gen) {
    ref::Vec w(p.d_bus.data(), p.d_bus.data() + p.d_bus.size());
    for (int i = 0; i < g.n_gen(); ++i) w[static_cast<std::size_t>(g.gen_bus[static_cast<std::size_t>(i)])] -= gen[i];
    return w;
}

}  // namespace

TEST_SUITE("scopf") {
    TEST_CASE("apr response examples") {
        const VectorXd g = vec({1.0, 0.7});
        AprRow a = apr_response(g, 0.5, 1, vec({2.0, 1.0}), vec({3.0, 5.0}));
        CHECK(a.g[0] == 2.0);
        CHECK(a.capped[0] == 0);
        CHECK(a.g[1] == 0.0);
        CHECK(a.capped[1] == 0);

        AprRow b = apr_response(g, 1.0, 1, vec({3.0, 1.0}), vec({2.0, 5.0}));
        CHECK(b.g[0] == 2.0);
        CHECK(b.capped[0] == 1);

        // Exactly at the cap is not capped.
        AprRow c = apr_response(g, 0.5, 1, vec({2.0, 1.0}), vec({2.0, 5.0}));
        CHECK(c.g[0] == 2.0);
        CHECK(c.capped[0] == 0);
    }

    TEST_CASE("apr response is monotone in n") {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int t = 0; t < 500; ++t) {
            const int n = 2 + t % 4;
            VectorXd gub(n), g(n), droop(n);
            for (int i = 0; i < n; ++i) {
                gub[i] = 0.5 + 2 * u(rng);
                g[i] = gub[i] * u(rng);
                droop[i] = 2 * u(rng);
            }
            const int k = t % n;
            const double n1 = u(rng), n2 = u(rng);
            const AprRow lo = apr_response(g, std::min(n1, n2), k, droop, gub);
            const AprRow hi = apr_response(g, std::max(n1, n2), k, droop, gub);
            CHECK((hi.g - lo.g).minCoeff() >= 0.0);
            CHECK(lo.g[k] == 0.0);
            CHECK((gub - hi.g).minCoeff() >= 0.0);
        }
    }

    TEST_CASE("base flows: co-located balance, two-bus example, linearity") {
        const GridCase co = CaseBuilder(2).gen(1, 0, 2, 1, 1).line(0, 1, 4.0, 1.0).load(1, 0.7).build();
        const GridModel mco(co);
        CHECK(base_flows(mco, vec({0.0, 0.7}), vec({0.7})).cwiseAbs().maxCoeff() <= 1e-15);

        const GridCase two = CaseBuilder(2).gen(0, 0, 2, 1, 1).line(0, 1, 4.0, 1.0).load(1, 1.0).build();
        const GridModel m2(two);
        CHECK(base_flows(m2, vec({0.0, 1.0}), vec({1.0}))[0] == doctest::Approx(1.0));

        const GridModel m(testing::load_fixture("bus5_3gen.json"));
        const VectorXd d = vec({0.0, 0.5, 0.0, 0.4, 0.3});
        const VectorXd g1 = vec({0.4, 0.5, 0.3}), g2 = vec({0.6, 0.2, 0.4});
        const VectorXd lhs = base_flows(m, 2.0 * d, g1 + g2);
        const VectorXd rhs = base_flows(m, d, g1) + base_flows(m, d, g2);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }

    TEST_CASE("base slack examples") {
        GridCase g = CaseBuilder(2).gen(0, 0, 2, 1, 1).line(0, 1, 1.0, 1.0).line(0, 1, 1.0, 1.0).load(1, 1).build();
        const VectorXd zero = slack_base(vec({0.5, -0.9}), g);
        CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
        const VectorXd eta = slack_base(vec({1.2, -1.5}), g);
        CHECK(eta[0] == doctest::Approx(0.2));
        CHECK(eta[1] == doctest::Approx(0.5));
    }

    TEST_CASE("generator contingency slack") {
        const GridModel m(testing::load_fixture("tri3_3gen.json"));
        const Instance inst = testing::base_instance(m.grid);
        const PreparedInstance p = prepare_instance(m, inst);
        const VectorXd g = vec({1.0, 0.2, 0.0});
        // A contingency row equal to the base dispatch has the base slack.
        CHECK(slack_gen_contingency(m, p, g) == slack_base(base_flows(m, p, g), m.grid));

        // Shifted dispatch against flows recomputed from scratch.
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int t = 0; t < 100; ++t) {
            VectorXd gk(3);
            for (int i = 0; i < 3; ++i) gk[i] = inst.gub[i] * u(rng);
            gk[t % 3] = 0.0;
            const VectorXd eta = slack_gen_contingency(m, p, gk);
            const VectorXd expect = ref_slack(m.grid, ref::dc_flows(m.grid, withdrawal(m.grid, p, gk)));
            CHECK((eta - expect).cwiseAbs().maxCoeff() <= 1e-12);
        }

        // Unlimited lines never carry slack.
        GridCase free = m.grid;
        free.fub.setConstant(std::numeric_limits<double>::infinity());
        free.flb.setConstant(-std::numeric_limits<double>::infinity());
        const GridModel mf(free);
        const PreparedInstance pf = prepare_instance(mf, inst);
        CHECK(slack_gen_contingency(mf, pf, vec({2.0, 0.0, 0.0})).maxCoeff() == 0.0);
    }

    TEST_CASE("line contingency slack") {
        const GridCase tri = CaseBuilder(3)
                                 .gen(0, 0, 2, 1, 1)
                                 .line(0, 1, 1.0, 1.0)
                                 .line(0, 2, 1.0, 0.8)
                                 .line(1, 2, 1.0, 0.8)
                                 .load(1, 0.9)
                                 .build();
        const GridModel m(tri);
        CHECK(slack_line_contingency(m, VectorXd::Zero(3), 0).maxCoeff() == 0.0);
        // Flow 0.6 on the outaged line reroutes through bus 3.
        const VectorXd eta = slack_line_contingency(m, vec({0.6, 0.3, -0.3}), 0);
        CHECK(eta[0] == 0.0);
        CHECK(eta[1] == doctest::Approx(0.1));
        CHECK(eta[2] == doctest::Approx(0.1));

        // Random flows against post-outage recomputation.
        const GridModel m5(testing::load_fixture("bus5_3gen.json"));
        const Instance inst = testing::base_instance(m5.grid);
        const PreparedInstance p = prepare_instance(m5, inst);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int t = 0; t < 50; ++t) {
            VectorXd g(3);
            for (int i = 0; i < 3; ++i) g[i] = inst.gub[i] * u(rng);
            const VectorXd f = base_flows(m5, p, g);
            for (int k : m5.contingencies.line) {
                const VectorXd eta5 = slack_line_contingency(m5, f, k);
                const VectorXd expect =
                    ref_slack(m5.grid, ref::dc_flows(m5.grid, withdrawal(m5.grid, p, g), k), k);
                CHECK((eta5 - expect).cwiseAbs().maxCoeff() <= 1e-10);
            }
        }
    }

    TEST_CASE("objective examples") {
        PrimalEstimate est;
        est.g = vec({0.5, 0.5});
        est.eta0 = VectorXd::Zero(3);
        est.eta_g = MatrixXd::Zero(2, 3);
        est.eta_e = MatrixXd::Zero(3, 3);
        const VectorXd c = vec({10.0, 20.0});
        CHECK(scopf_objective(c, est, 1500.0) == doctest::Approx(15.0));

        est.g.setZero();
        est.eta0[1] = 0.1;
        CHECK(scopf_objective(c, est, 1500.0) == doctest::Approx(150.0));
    }

    TEST_CASE("objective is invariant to contingency ordering") {
        const GridModel m(testing::load_fixture("bus5_3gen.json"));
        const Instance inst = testing::base_instance(m.grid);
        const PreparedInstance p = prepare_instance(m, inst);
        PrimalEstimate est;
        est.g = vec({0.9, 0.2, 0.1});
        est.gk.resize(m.n_gen_contingencies(), 3);
        for (int r = 0; r < m.n_gen_contingencies(); ++r)
            est.gk.row(r) = binary_search_layer(est.g, p.d_total, m.contingencies.gen[static_cast<std::size_t>(r)],
                                                p.droop, p.gub)
                                .gk.transpose();
        retrieve_slacks(m, p, est);
        const double base = scopf_objective(p.c, est, m.grid.penalty_pi);
        PrimalEstimate perm = est;
        perm.eta_g = est.eta_g.colwise().reverse().eval();
        perm.gk = est.gk.colwise().reverse().eval();
        perm.eta_e = est.eta_e.colwise().reverse().eval();
        CHECK(scopf_objective(p.c, perm, m.grid.penalty_pi) == doctest::Approx(base).epsilon(1e-14));
    }

    TEST_CASE("balance residual examples") {
        PrimalEstimate est;
        est.gk = MatrixXd(2, 2);
        est.gk << 1.5, 0.0, 0.0, 2.0;
        const VectorXd h = balance_residuals(est, 1.5);
        CHECK(h[0] == 0.0);
        CHECK(h[1] == doctest::Approx(0.5));
    }

    TEST_CASE("all slacks are nonnegative on fuzzed dispatches") {
        const GridModel m(testing::load_fixture("bus5_3gen.json"));
        PerturbationConfig cfg;
        cfg.seed = 4;
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::uint64_t t = 0; t < 200; ++t) {
            const Instance inst = sample_feasible_instance(m.grid, cfg, t);
            const PreparedInstance p = prepare_instance(m, inst);
            PrimalEstimate est;
            est.g = VectorXd(3);
            for (int i = 0; i < 3; ++i) est.g[i] = inst.gub[i] * u(rng);
            est.gk = MatrixXd(m.n_gen_contingencies(), 3);
            for (int r = 0; r < est.gk.rows(); ++r)
                for (int i = 0; i < 3; ++i) est.gk(r, i) = inst.gub[i] * u(rng);
            retrieve_slacks(m, p, est);
            CHECK(est.eta0.minCoeff() >= 0.0);
            CHECK(est.eta_g.minCoeff() >= 0.0);
            CHECK(est.eta_e.minCoeff() >= 0.0);
            for (std::size_t r = 0; r < m.contingencies.line.size(); ++r)
                CHECK(est.eta_e(static_cast<Eigen::Index>(r), m.contingencies.line[r]) == 0.0);
        }
    }

    TEST_CASE("prepared instance aggregates loads per bus") {
        const GridCase g = CaseBuilder(2).gen(0, 0, 3, 1, 0.5).line(0, 1, 1, 1).load(1, 0.4).load(1, 0.6).load(0, 0.2).build();
        const GridModel m(g);
        const PreparedInstance p = prepare_instance(m, testing::base_instance(g));
        CHECK(p.d_bus[0] == doctest::Approx(0.2));
        CHECK(p.d_bus[1] == doctest::Approx(1.0));
        CHECK(p.d_total == doctest::Approx(1.2));
        CHECK(p.droop[0] == doctest::Approx(1.5));
    }
}
