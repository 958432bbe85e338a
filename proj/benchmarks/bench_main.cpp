#include <benchmark/benchmark.h>

#include "descfilter/config.hpp"
#include "descfilter/dae_sim.hpp"
#include "descfilter/expr.hpp"
#include "descfilter/filter_lmis.hpp"
#include "descfilter/sdp.hpp"
#include "descfilter/synthesis.hpp"

using namespace descfilter;

namespace {

const ConfigFile& two_state() {
    static const ConfigFile cfg = load_config(DESCFILTER_FIXTURE_DIR "/two_state.cfg");
    return cfg;
}

const FilterRealization& two_state_filter() {
    static const FilterRealization f = synthesize(two_state().plant, two_state().structure, two_state().synthesis).filter;
    return f;
}

void BM_ParseExpression(benchmark::State& state) {
    for (auto _ : state) {
        auto e = parse_expr("0.5*sin(x2) + tanh(x1)^2 - exp(-t/3)*cos(7*t); 0.5*sin(x1)", 2, 0);
        benchmark::DoNotOptimize(e);
    }
}
BENCHMARK(BM_ParseExpression);

void BM_Jacobian(benchmark::State& state) {
    const auto& phi = two_state().plant.phi;
    Vec x(2);
    x << 0.3, -1.2;
    for (auto _ : state) benchmark::DoNotOptimize(phi.jacobian_x(x, Vec(), 0.0));
}
BENCHMARK(BM_Jacobian);

void BM_SolveTwoStateSdp(benchmark::State& state) {
    const auto& cfg = two_state();
    LmiOptions o;
    o.xi2 = Xi2Mode::Off;
    const auto prob = apply_strict_substitution(build_theorem1(cfg.plant, cfg.structure, o), cfg.plant.E,
                                                orthogonal_complement(cfg.plant.E));
    const auto prog = lower(prob);
    for (auto _ : state) benchmark::DoNotOptimize(solve(prog));
}
BENCHMARK(BM_SolveTwoStateSdp)->Unit(benchmark::kMillisecond);

void BM_Synthesize(benchmark::State& state) {
    const auto& cfg = two_state();
    for (auto _ : state) benchmark::DoNotOptimize(synthesize(cfg.plant, cfg.structure, cfg.synthesis));
}
BENCHMARK(BM_Synthesize)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
    const auto& cfg = two_state();
    const auto& f = two_state_filter();
    SimConfig sc = make_sim_config(cfg);
    sc.t_end = static_cast<double>(state.range(0));
    Vec w0 = Vec::Zero(1);
    const Vec x0 = consistent_init(cfg.plant, cfg.simulation.x0_guess, w0, Vec(), cfg.simulation.x0_init);
    const Vec xf0 = Vec::Zero(2);
    for (auto _ : state) benchmark::DoNotOptimize(simulate(cfg.plant, f, sc, x0, xf0));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(sc.t_end / sc.dt));
}
BENCHMARK(BM_Simulate)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
