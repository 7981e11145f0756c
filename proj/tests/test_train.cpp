#include <doctest.h>

#include <random>

#include "frozen.hpp"
#include "scopf/dataset.hpp"
#include "scopf/error.hpp"
#include "scopf/oracle.hpp"
#include "scopf/train.hpp"
#include "support.hpp"

using namespace scopf;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

TrainerConfig small_config() {
    TrainerConfig c;
    c.outer_iterations = 3;
    c.inner_iterations = 20;
    c.batch = 4;
    c.lr = 1e-3;
    c.seed = 5;
    return c;
}

struct Setup {
    GridModel model{testing::load_fixture("bus5_3gen.json")};
    Dataset data;
    PreparedSet set;

    explicit Setup(std::size_t n = 40, std::uint64_t seed = 21) {
        PerturbationConfig cfg;
        cfg.seed = seed;
        data = generate_dataset(model.grid, cfg, n);
        set = prepare_set(model, data, false);
    }
};

}  // namespace

TEST_SUITE("train") {
    TEST_CASE("primal loss examples") {
        CHECK(primal_loss(1e5, VectorXd::Zero(2), VectorXd::Zero(2), 3.0, 1e5).value == doctest::Approx(1.0));
        const auto l = primal_loss(0.0, vec({0.5}), vec({1.0}), 2.0, 1e5);
        CHECK(l.value == doctest::Approx(0.75));
        CHECK(l.d_h[0] == doctest::Approx(2.0));
        CHECK(l.d_objective == doctest::Approx(1e-5));
    }

    TEST_CASE("penalty loss") {
        const auto l = penalty_loss(2e5, vec({0.5, -0.5}), 2.0, 1e5);
        CHECK(l.value == doctest::Approx(2.0 + 1.0));
        CHECK(l.d_h == vec({2.0, -2.0}));
    }

    TEST_CASE("dual loss examples") {
        const VectorXd frozen = vec({0.3, -0.2}), h = vec({0.5, 1.0});
        CHECK(dual_loss(frozen + 0.1 * h, frozen, h, 0.1) == doctest::Approx(0.0));
        CHECK(dual_loss(vec({0.0, 0.0}), frozen, VectorXd::Zero(2), 0.1) == doctest::Approx(frozen.norm()));
        CHECK(dual_loss(vec({0.0}), vec({0.0}), vec({1.0}), 0.1) == doctest::Approx(0.1));
    }

    TEST_CASE("naive and LD losses") {
        const VectorXd g = vec({1.0, 2.0}), star = vec({1.0, 2.0});
        VectorXd grad;
        CHECK(naive_loss(g, star, &grad) == 0.0);
        CHECK(grad == VectorXd::Zero(2));
        CHECK(naive_loss(vec({4.0, 6.0}), vec({1.0, 2.0})) == doctest::Approx(5.0));
        CHECK(ld_loss(g, star, VectorXd::Zero(1), 1e3) == naive_loss(g, star));
        CHECK(ld_loss(g, star, vec({0.1}), 1e3) == doctest::Approx(10.0));
    }

    TEST_CASE("penalty update rule") {
        TrainerConfig c;
        CHECK(update_penalty(1.0, 0.5, 1.0, c) == 1.0);
        CHECK(update_penalty(1.0, 1.0, 1.0, c) == 2.0);
        CHECK(update_penalty(c.rho_max, 5.0, 1.0, c) == c.rho_max);
        CHECK(update_penalty(0.7e8, 5.0, 1.0, c) == c.rho_max);
        CHECK(update_penalty(0.1, 1.0, std::numeric_limits<double>::infinity(), c) == 0.1);
    }

    TEST_CASE("trainer config validation") {
        TrainerConfig c;
        c.tau = 1.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = TrainerConfig{};
        c.alpha = 1.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = TrainerConfig{};
        c.inner_iterations = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        CHECK(TrainerConfig{}.total_steps(Method::Pdl) == 80000);
        CHECK(TrainerConfig{}.total_steps(Method::Penalty) == 40000);
        CHECK(method_from_string("ld") == Method::Ld);
        CHECK_THROWS_AS(method_from_string("sgd"), ConfigError);
    }

    TEST_CASE("max violation is the largest residual and max-composes over unions") {
        Setup s(30);
        Rng rng(3);
        const Mlp net = make_primal_network(s.model, rng);
        const double v_all = max_violation(s.model, s.set, net);

        double expect = 0.0;
        const MatrixXd z = net.forward(s.set.inputs);
        for (std::size_t i = 0; i < s.set.prepared.size(); ++i) {
            const auto out = primal_pipeline(s.model, s.set.prepared[i], z.col(static_cast<Eigen::Index>(i)));
            expect = std::max(expect, out.h.cwiseAbs().maxCoeff());
        }
        CHECK(v_all == expect);

        Dataset a = s.data, b = s.data;
        a.records.resize(12);
        b.records.erase(b.records.begin(), b.records.begin() + 12);
        const double va = max_violation(s.model, prepare_set(s.model, a, false), net);
        const double vb = max_violation(s.model, prepare_set(s.model, b, false), net);
        CHECK(v_all == std::max(va, vb));
    }

    TEST_CASE("supervised gradient through bound map and repair matches finite differences") {
        Setup s(10);
        std::mt19937_64 rng(4);
        std::normal_distribution<double> n01;
        double worst = 0.0;
        for (std::size_t i = 0; i < s.set.prepared.size(); ++i) {
            const auto& p = s.set.prepared[i];
            VectorXd z(3), star(3);
            for (int j = 0; j < 3; ++j) z[j] = n01(rng);
            star = repair_layer(bound_map(VectorXd::Zero(3), p.glb, p.gub), p.d_total, p.glb, p.gub);
            const auto out = primal_pipeline(s.model, p, z);
            if (std::abs(out.g_check.sum() - p.d_total) < 1e-3) continue;
            VectorXd w_g;
            naive_loss(out.est.g, star, &w_g);
            const VectorXd analytic = pipeline_vjp(s.model, p, out, 0.0, VectorXd::Zero(out.h.size()), w_g);
            VectorXd numeric(3);
            for (int j = 0; j < 3; ++j) {
                VectorXd zp = z, zm = z;
                zp[j] += 1e-6;
                zm[j] -= 1e-6;
                numeric[j] = (naive_loss(testing::frozen_dispatch(p, out.tape.repair, zp), star) -
                              naive_loss(testing::frozen_dispatch(p, out.tape.repair, zm), star)) /
                             2e-6;
            }
            worst = std::max(worst, testing::rel_err(analytic, numeric));
        }
        CHECK(worst <= 1e-5);
    }

    TEST_CASE("naive loss vanishes when the network reproduces the target") {
        Setup s(5);
        const auto& p = s.set.prepared[0];
        const auto out = primal_pipeline(s.model, p, VectorXd::Zero(3));
        CHECK(naive_loss(out.est.g, out.est.g) == 0.0);
    }

    TEST_CASE("pdl: log rows, history and penalty schedule") {
        Setup s;
        const TrainerConfig c = small_config();
        const TrainResult r = train_pdl(s.model, s.set, c);
        CHECK(r.log.size() == static_cast<std::size_t>(2 * c.outer_iterations * c.inner_iterations));
        CHECK(r.history.size() == static_cast<std::size_t>(c.outer_iterations));
        CHECK(r.state.step == c.total_steps(Method::Pdl));
        CHECK(r.log.front().inner_l == 1);
        CHECK(r.log.back().inner_l == 2 * c.inner_iterations);
        CHECK(r.history.front().rho == c.rho0);
        CHECK(r.history.front().rho_next == c.rho0);  // v_0 = +inf
        double rho = c.rho0;
        for (const auto& row : r.log) {
            CHECK(row.rho >= rho);
            rho = row.rho;
        }
        for (const auto& h : r.history) {
            CHECK(h.rho_next == update_penalty(h.rho, h.v_k, h.v_prev, c));
            CHECK(h.rho_next <= c.rho_max);
        }
        CHECK(r.dual.has_value());
        CHECK(r.frozen_dual.has_value());
    }

    TEST_CASE("pdl is deterministic under a fixed seed") {
        Setup s;
        const TrainerConfig c = small_config();
        const TrainResult a = train_pdl(s.model, s.set, c);
        const TrainResult b = train_pdl(s.model, s.set, c);
        CHECK(a.primal.params() == b.primal.params());
        CHECK(a.dual->params() == b.dual->params());
        REQUIRE(a.log.size() == b.log.size());
        for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
        for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].v_k == b.history[i].v_k);
    }

    TEST_CASE("dual parameters are untouched during primal steps") {
        // The snapshot taken after the primal phase of outer k + 1 must equal
        // the dual network as it stood at the end of outer k.
        Setup s;
        std::vector<VectorXd> dual_after, snapshot;
        const TrainerConfig c = small_config();
        train_pdl(s.model, s.set, c, [&](const TrainResult& r) {
            dual_after.push_back(r.dual->params());
            snapshot.push_back(r.frozen_dual->params());
        });
        REQUIRE(dual_after.size() == 3);
        for (std::size_t k = 1; k < dual_after.size(); ++k) CHECK(snapshot[k] == dual_after[k - 1]);
        CHECK(snapshot[1] != dual_after[1]);  // the dual phase itself does move
    }

    TEST_CASE("penalty trainer") {
        Setup s;
        const TrainerConfig c = small_config();
        const TrainResult a = train_penalty(s.model, s.set, c);
        const TrainResult b = train_penalty(s.model, s.set, c);
        CHECK(a.log.size() == static_cast<std::size_t>(c.outer_iterations * c.inner_iterations));
        CHECK(!a.dual.has_value());
        CHECK(a.primal.params() == b.primal.params());
        for (std::size_t k = 1; k < a.history.size(); ++k) CHECK(a.history[k].rho >= a.history[k - 1].rho);
    }

    TEST_CASE("supervised trainers need labels") {
        Setup s(5);
        CHECK_THROWS_WITH_AS(prepare_set(s.model, s.data, true), doctest::Contains("oracle"), DataError);
        CHECK_THROWS_WITH_AS(train_naive(s.model, s.set, small_config()), doctest::Contains("oracle"), DataError);
    }

    TEST_CASE("naive and LD trainers on labeled data") {
        Setup s(20);
        for (auto& r : s.data.records) r.label = to_label(oracle_solve(s.model, r.inst, 2e-2));
        const PreparedSet set = prepare_set(s.model, s.data, true);
        CHECK(set.g_star.size() == set.prepared.size());
        TrainerConfig c = small_config();
        const TrainResult naive = train_naive(s.model, set, c);
        const TrainResult ld = train_ld(s.model, set, c);
        CHECK(naive.log.size() == 60);
        CHECK(ld.log.size() == 60);
        CHECK(naive.log.front().rho == 0.0);
        CHECK(ld.log.front().rho == c.ld_rho);
        CHECK(train_naive(s.model, set, c).primal.params() == naive.primal.params());
    }

    TEST_CASE("non-finite loss aborts with DivergenceError") {
        Setup s(8);
        s.set.prepared[0].c[0] = std::numeric_limits<double>::quiet_NaN();
        TrainerConfig c = small_config();
        c.batch = 8;
        CHECK_THROWS_AS(train_penalty(s.model, s.set, c), DivergenceError);
    }

    TEST_CASE("log csv layout") {
        const std::string csv = log_to_csv({{1, 2, 0.5, 0.1, 0.0, 1e-4, 3.0}});
        CHECK(csv.rfind("outer_k,inner_l,loss,rho,v_k,lr,wall_ms\n", 0) == 0);
        CHECK(csv.find("1,2,0.5,0.1,0,0.0001,3\n") != std::string::npos);
    }
}
