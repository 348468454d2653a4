#include <benchmark/benchmark.h>
#include <random>

#include "maeq/eqtest.hpp"

using namespace maeq;

namespace {

GroupData emax_group(std::size_t per_level, std::uint64_t seed) {
    const AveragedCurve truth = single_model_curve(ModelSpec::of(Family::Emax), {1.0, 2.0, 1.0}, 0.25);
    return generate_bootstrap_data(truth, balanced_design({0, 1, 2, 3, 4}, per_level), seed);
}

void BM_FitModel(benchmark::State& state) {
    const auto family = static_cast<Family>(state.range(0));
    const GroupData g = emax_group(20, 1);
    const ModelSpec spec = family == Family::Beta ? ModelSpec::beta(4.8) : ModelSpec::of(family);
    for (auto _ : state) benchmark::DoNotOptimize(fit_model(g, spec));
    state.SetLabel(std::string(family_name(family)));
}
BENCHMARK(BM_FitModel)->DenseRange(0, static_cast<int>(kAllFamilies.size()) - 1);

void BM_FitAveraged(benchmark::State& state) {
    const GroupData g = emax_group(20, 2);
    const auto cands = make_candidates(kAllFamilies, 4.8);
    for (auto _ : state) benchmark::DoNotOptimize(fit_averaged(g, cands));
}
BENCHMARK(BM_FitAveraged);

void BM_MaxAbsDeviation(benchmark::State& state) {
    const auto a = single_model_curve(ModelSpec::of(Family::Emax), {1.0, 2.0, 1.0}, 0.25);
    const auto b = single_model_curve(ModelSpec::of(Family::Exp), {0.75, 2.2, 8.0}, 0.25);
    const DoseGrid grid{0.0, 4.0, static_cast<std::size_t>(state.range(0))};
    for (auto _ : state) benchmark::DoNotOptimize(max_abs_deviation(a, b, grid));
}
BENCHMARK(BM_MaxAbsDeviation)->Arg(101)->Arg(501)->Arg(2001);

// Whole test per bootstrap replicate: emax vs exp candidates, n = 20 per group.
void BM_EquivalenceTest(benchmark::State& state) {
    const GroupData g1 = emax_group(4, 3);
    const GroupData g2 = emax_group(4, 4);
    const auto cands = make_candidates(std::vector<Family>{Family::Emax, Family::Exp}, 4.8);
    TestOptions o;
    o.n_boot = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_equivalence_test(g1, g2, cands, cands, o));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EquivalenceTest)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
