#include "experiments.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace kamstab;

namespace {

Poly random_block(const TruncationSpec& t, int terms, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    RandomPolyOptions o;
    o.terms = terms;
    o.max_weight = t.D;
    o.max_k = 2;
    o.jets = t.m > 0;
    return random_poly(t, o, rng);
}

void BM_PoissonBracket(benchmark::State& state) {
    const TruncationSpec t{1, static_cast<int>(state.range(0)), 8, 6, 0};
    const Poly U = random_block(t, 40, 1), V = random_block(t, 40, 2);
    for (auto _ : state) benchmark::DoNotOptimize(poisson_bracket(U, V, t));
}
BENCHMARK(BM_PoissonBracket)->Arg(2)->Arg(4)->Arg(8);

void BM_LieTransform(benchmark::State& state) {
    const TruncationSpec t{1, 4, 8, 6, 0};
    const Poly H = random_block(t, 40, 3);
    const Poly F = poly_scale(random_block(t, 10, 4), cplx(1e-2));
    const int order = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(lie_transform(H, F, t, order));
}
BENCHMARK(BM_LieTransform)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_KamStepNls(benchmark::State& state) {
    NlsConfig cfg;
    cfg.J = static_cast<int>(state.range(0));
    cfg.jets = false;
    const NlsModel m = build_nls_hamiltonian(cfg);
    IterationSchedule sch;
    sch.eta = 0.05;
    for (auto _ : state) benchmark::DoNotOptimize(kam_step(m.N, m.R, m.freq, sch, 0));
}
BENCHMARK(BM_KamStepNls)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_SimulateStep(benchmark::State& state) {
    NlsConfig cfg;
    cfg.J = static_cast<int>(state.range(0));
    SimState s;
    s.w.assign(cfg.J, cplx(0.1, 0.05));
    const SimOptions opt{100 * 0.01, 0.01, 0};
    for (auto _ : state) benchmark::DoNotOptimize(simulate(cfg, s, opt));
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_SimulateStep)->Arg(8)->Arg(32)->Arg(128);

void BM_MonteCarloStrip(benchmark::State& state) {
    const ParameterFamily fam = exp::nls_box_family();
    ResonanceQuery q;
    q.k = {1};
    q.l = {-1, 0};
    q.eta = 0.1;
    q.tau = 2;
    const long samples = state.range(0);
    for (auto _ : state) benchmark::DoNotOptimize(resonant_measure_mc(fam, q, samples, 1));
    state.SetItemsProcessed(state.iterations() * samples);
}
BENCHMARK(BM_MonteCarloStrip)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
