#include <benchmark/benchmark.h>

#include <filesystem>

#include "scopf/dataset.hpp"
#include "scopf/layers.hpp"
#include "scopf/oracle.hpp"
#include "scopf/pipeline.hpp"
#include "scopf/train.hpp"

using namespace scopf;

namespace {

const GridModel& model() {
    static const GridModel m(load_case(std::filesystem::path(SCOPF_FIXTURE_DIR) / "bus5_3gen.json"));
    return m;
}

Instance instance(std::uint64_t i) {
    PerturbationConfig cfg;
    cfg.seed = 7;
    return sample_feasible_instance(model().grid, cfg, i);
}

void BM_PrimalInference(benchmark::State& state) {
    Rng rng(1);
    const Mlp net = make_primal_network(model(), rng);
    const Instance inst = instance(0);
    for (auto _ : state) {
        const PreparedInstance p = prepare_instance(model(), inst);
        benchmark::DoNotOptimize(infer(model(), net, p, inst.x));
    }
}
BENCHMARK(BM_PrimalInference);

void BM_PipelineBackward(benchmark::State& state) {
    const PreparedInstance p = prepare_instance(model(), instance(1));
    const VectorXd z = VectorXd::Constant(model().n_gen(), 0.3);
    const PipelineOutput out = primal_pipeline(model(), p, z);
    const VectorXd w_h = VectorXd::Ones(out.h.size());
    for (auto _ : state) benchmark::DoNotOptimize(pipeline_vjp(model(), p, out, 1e-5, w_h));
}
BENCHMARK(BM_PipelineBackward);

void BM_BinarySearch(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const VectorXd g = VectorXd::Constant(n, 1.0), droop = VectorXd::Constant(n, 0.5), gub = VectorXd::Constant(n, 2.0);
    for (auto _ : state) benchmark::DoNotOptimize(binary_search_layer(g, static_cast<double>(n), 0, droop, gub));
}
BENCHMARK(BM_BinarySearch)->Arg(3)->Arg(30)->Arg(300);

void BM_RepairLayer(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const VectorXd glb = VectorXd::Zero(n), gub = VectorXd::Constant(n, 2.0), g = VectorXd::Constant(n, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(repair_layer(g, static_cast<double>(n), glb, gub));
}
BENCHMARK(BM_RepairLayer)->Arg(3)->Arg(300);

void BM_OracleSolve(benchmark::State& state) {
    const Instance inst = instance(2);
    for (auto _ : state) benchmark::DoNotOptimize(oracle_solve(model(), inst, 1e-2));
}
BENCHMARK(BM_OracleSolve)->Unit(benchmark::kMillisecond);

void BM_TrainStepsPdl(benchmark::State& state) {
    PerturbationConfig cfg;
    cfg.seed = 3;
    const PreparedSet set = prepare_set(model(), generate_dataset(model().grid, cfg, 64), false);
    TrainerConfig tc;
    tc.outer_iterations = 1;
    tc.inner_iterations = 100;
    for (auto _ : state) benchmark::DoNotOptimize(train_pdl(model(), set, tc));
}
BENCHMARK(BM_TrainStepsPdl)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
