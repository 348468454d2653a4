#include "maeq/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <ostream>
#include <spdlog/spdlog.h>

#include "maeq/errors.hpp"
#include "maeq/parallel.hpp"

namespace maeq {

namespace {

constexpr double kDoseLevels[] = {0.0, 1.0, 2.0, 3.0, 4.0};

// Scenario 1: exp intercept beta20 and the resulting deviation from emax(1, 2, 1).
constexpr std::pair<double, double> kS1Intercepts[] = {
    {1.5, 0.25}, {1.25, 0.5}, {1.0, 0.75}, {0.75, 1.0}, {0.5, 1.5}};

bool same(double a, double b) { return std::abs(a - b) <= 1e-12; }

double s1_intercept(double d) {
    for (auto [dev, b20] : kS1Intercepts)
        if (same(dev, d)) return b20;
    throw ConfigError("scenario s1 has no sub-scenario with d = " + fmt::format("{}", d));
}

GroupData design_for(std::size_t n, std::string label) {
    return balanced_design({std::begin(kDoseLevels), std::end(kDoseLevels)}, n / 5, std::move(label));
}

}  // namespace

std::string_view scenario_name(ScenarioId id) noexcept {
    switch (id) {
        case ScenarioId::S1_EmaxVsExp: return "s1";
        case ScenarioId::S2_ShiftedEmax: return "s2";
        case ScenarioId::S3_ShiftedExp: return "s3";
    }
    return "?";
}

ScenarioId parse_scenario(std::string_view name) {
    for (ScenarioId id : {ScenarioId::S1_EmaxVsExp, ScenarioId::S2_ShiftedEmax, ScenarioId::S3_ShiftedExp})
        if (scenario_name(id) == name) return id;
    throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

std::string_view arm_name(Arm arm) noexcept {
    switch (arm) {
        case Arm::TrueModels: return "true";
        case Arm::MisspecA: return "misspec_a";
        case Arm::MisspecB: return "misspec_b";
        case Arm::MisspecSwap: return "misspec_swap";
        case Arm::MisspecBoth: return "misspec_both";
        case Arm::ModelAveraging: return "ma";
    }
    return "?";
}

Arm parse_arm(std::string_view name) {
    for (Arm a : {Arm::TrueModels, Arm::MisspecA, Arm::MisspecB, Arm::MisspecSwap,
                  Arm::MisspecBoth, Arm::ModelAveraging})
        if (arm_name(a) == name) return a;
    throw ConfigError("unknown arm '" + std::string(name) + "'");
}

std::vector<Arm> legal_arms(ScenarioId id) {
    if (id == ScenarioId::S1_EmaxVsExp)
        return {Arm::TrueModels, Arm::MisspecA, Arm::MisspecB, Arm::MisspecSwap, Arm::ModelAveraging};
    return {Arm::TrueModels, Arm::MisspecA, Arm::MisspecB, Arm::MisspecBoth, Arm::ModelAveraging};
}

Preset parse_preset(std::string_view name) {
    if (name == "desk") return Preset::Desk;
    if (name == "full") return Preset::Full;
    throw ConfigError("unknown preset '" + std::string(name) + "'");
}

std::pair<std::size_t, std::size_t> preset_sizes(Preset p) {
    return p == Preset::Full ? std::pair<std::size_t, std::size_t>{1000, 500}
                             : std::pair<std::size_t, std::size_t>{500, 300};
}

double default_epsilon(ScenarioId id) noexcept { return id == ScenarioId::S1_EmaxVsExp ? 1.0 : 0.5; }

std::vector<double> d_values(ScenarioId id) {
    if (id == ScenarioId::S1_EmaxVsExp) return {1.5, 1.25, 1.0, 0.75, 0.5};
    return {1.0, 0.75, 0.5, 0.25, 0.1, 0.0};
}

std::vector<double> null_d_values(ScenarioId id) {
    std::vector<double> out;
    for (double d : d_values(id))
        if (d >= default_epsilon(id)) out.push_back(d);
    return out;
}

std::vector<double> alternative_d_values(ScenarioId id) {
    std::vector<double> out;
    for (double d : d_values(id))
        if (d < default_epsilon(id)) out.push_back(d);
    return out;
}

std::vector<std::pair<double, double>> sigma2_pairs() { return {{0.25, 0.25}, {0.25, 0.5}, {0.5, 0.5}}; }

std::vector<std::pair<std::size_t, std::size_t>> n_pairs() { return {{10, 10}, {10, 20}, {20, 20}, {50, 50}}; }

void validate(const ScenarioConfig& c) {
    const auto ds = d_values(c.scenario_id);
    if (std::none_of(ds.begin(), ds.end(), [&](double d) { return same(d, c.d_true); }))
        throw ConfigError(fmt::format("scenario {} has no sub-scenario with d = {}",
                                      scenario_name(c.scenario_id), c.d_true));
    const auto sp = sigma2_pairs();
    if (std::none_of(sp.begin(), sp.end(), [&](auto p) {
            return same(p.first, c.sigma2_pair.first) && same(p.second, c.sigma2_pair.second);
        }))
        throw ConfigError(fmt::format("variance pair ({}, {}) is not part of the scenario grid",
                                      c.sigma2_pair.first, c.sigma2_pair.second));
    const auto np = n_pairs();
    if (std::find(np.begin(), np.end(), c.n_pair) == np.end())
        throw ConfigError(fmt::format("sample sizes ({}, {}) are not part of the scenario grid",
                                      c.n_pair.first, c.n_pair.second));
    const auto arms = legal_arms(c.scenario_id);
    if (std::find(arms.begin(), arms.end(), c.arm) == arms.end())
        throw ConfigError(fmt::format("arm {} is not defined for scenario {}", arm_name(c.arm),
                                      scenario_name(c.scenario_id)));
    if (!(c.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (c.n_sim < 1) throw ConfigError("n_sim must be at least 1");
    if (c.n_boot < 2) throw ConfigError("the hybrid test needs n_boot >= 2");
}

ScenarioTruth scenario_truth(const ScenarioConfig& c) {
    const ModelSpec emax = ModelSpec::of(Family::Emax);
    const ModelSpec exp = ModelSpec::of(Family::Exp);
    switch (c.scenario_id) {
        case ScenarioId::S1_EmaxVsExp:
            return {emax, {1.0, 2.0, 1.0}, exp, {s1_intercept(c.d_true), 2.2, 8.0}};
        case ScenarioId::S2_ShiftedEmax: return {emax, {c.d_true, 5.0, 1.0}, emax, {0.0, 5.0, 1.0}};
        case ScenarioId::S3_ShiftedExp: return {exp, {c.d_true, 2.2, 8.0}, exp, {0.0, 2.2, 8.0}};
    }
    throw ConfigError("unknown scenario");
}

std::pair<std::vector<ModelSpec>, std::vector<ModelSpec>> arm_candidates(const ScenarioConfig& c) {
    const ScenarioTruth t = scenario_truth(c);
    const ModelSpec emax = ModelSpec::of(Family::Emax);
    const ModelSpec exp = ModelSpec::of(Family::Exp);
    auto wrong = [&](const ModelSpec& s) { return s.family == Family::Emax ? exp : emax; };
    const bool s1 = c.scenario_id == ScenarioId::S1_EmaxVsExp;
    switch (c.arm) {
        case Arm::TrueModels: return {{t.spec1}, {t.spec2}};
        case Arm::MisspecA:
            if (s1) return {{exp}, {exp}};
            return {{wrong(t.spec1)}, {t.spec2}};
        case Arm::MisspecB:
            if (s1) return {{emax}, {emax}};
            return {{t.spec1}, {wrong(t.spec2)}};
        case Arm::MisspecSwap:
            if (!s1) throw ConfigError("arm misspec_swap is only defined for scenario s1");
            return {{t.spec2}, {t.spec1}};
        case Arm::MisspecBoth:
            if (s1) throw ConfigError("arm misspec_both is not defined for scenario s1");
            return {{wrong(t.spec1)}, {wrong(t.spec2)}};
        case Arm::ModelAveraging: return {{emax, exp}, {emax, exp}};
    }
    throw ConfigError("unknown arm");
}

std::uint64_t cell_seed(const ScenarioConfig& c) {
    const std::string key = fmt::format("{}|{:.17g}|{:.17g}|{:.17g}|{}|{}", scenario_name(c.scenario_id),
                                        c.d_true, c.sigma2_pair.first, c.sigma2_pair.second,
                                        c.n_pair.first, c.n_pair.second);
    return derive_seed(c.seed, stable_hash(key));
}

ScenarioReport run_cell(const ScenarioConfig& config) {
    validate(config);
    const ScenarioTruth truth = scenario_truth(config);
    const auto [cand1, cand2] = arm_candidates(config);
    const AveragedCurve true1 = single_model_curve(truth.spec1, truth.theta1, config.sigma2_pair.first);
    const AveragedCurve true2 = single_model_curve(truth.spec2, truth.theta2, config.sigma2_pair.second);
    const GroupData design1 = design_for(config.n_pair.first, "group1");
    const GroupData design2 = design_for(config.n_pair.second, "group2");
    const std::uint64_t base = cell_seed(config);

    TestOptions topts;
    topts.epsilon = config.epsilon;
    topts.alpha = config.alpha;
    topts.method = CiMethod::Hybrid;
    topts.n_boot = config.n_boot;
    topts.grid_points = config.grid_points;
    topts.range = std::pair{0.0, 4.0};
    topts.average = config.average;
    topts.threads = 1;

    struct Outcome {
        bool ok = false;
        bool reject = false;
        double d_hat = 0.0;
    };
    std::vector<Outcome> outcomes(config.n_sim);
    parallel_for(config.n_sim, config.threads, [&](std::size_t s) {
        const std::uint64_t run_seed = derive_seed(base, s);
        Engine engine = make_engine(derive_seed(run_seed, 0));
        // truth curves are evaluated directly, never refitted
        const GroupData y1 = generate_bootstrap_data(true1, design1, engine);
        const GroupData y2 = generate_bootstrap_data(true2, design2, engine);
        TestOptions o = topts;
        o.seed = derive_seed(run_seed, 1);
        try {
            const TestResult r = run_equivalence_test(y1, y2, cand1, cand2, o);
            outcomes[s] = {true, r.reject_h0, r.d_hat};
        } catch (const std::runtime_error& e) {
            spdlog::debug("simulation run {} failed: {}", s, e.what());
        }
    });

    ScenarioReport rep;
    rep.config = config;
    double sum_d = 0.0;
    for (const Outcome& o : outcomes) {
        if (!o.ok) {
            ++rep.n_failed;
            continue;
        }
        ++rep.n_effective;
        rep.rejections += o.reject ? 1 : 0;
        sum_d += o.d_hat;
    }
    const double n = static_cast<double>(config.n_sim);
    rep.rejection_rate = static_cast<double>(rep.rejections) / n;
    rep.mc_stderr = std::sqrt(rep.rejection_rate * (1.0 - rep.rejection_rate) / n);
    rep.mean_d_hat = rep.n_effective > 0 ? sum_d / static_cast<double>(rep.n_effective) : 0.0;
    if (rep.n_failed > 0)
        spdlog::warn("{} / {}: {} of {} runs failed", scenario_name(config.scenario_id),
                     arm_name(config.arm), rep.n_failed, config.n_sim);
    return rep;
}

std::vector<Cell> scenario_cells(ScenarioId id, std::span<const double> d_subset) {
    std::vector<double> ds = d_subset.empty() ? d_values(id) : std::vector<double>(d_subset.begin(), d_subset.end());
    std::vector<Cell> cells;
    for (double d : ds)
        for (auto s2 : sigma2_pairs())
            for (auto n : n_pairs()) cells.push_back({d, s2, n});
    return cells;
}

GridReport run_grid(ScenarioId id, std::span<const Arm> arms, std::span<const Cell> cells,
                    const GridOptions& opts, const Budget& budget) {
    GridReport out;
    out.n_planned = arms.size() * cells.size();
    const auto start = std::chrono::steady_clock::now();
    for (const Cell& cell : cells) {
        for (Arm arm : arms) {
            const bool out_of_reports = budget.max_reports && out.reports.size() >= *budget.max_reports;
            const bool out_of_time =
                budget.max_wall_time && std::chrono::steady_clock::now() - start >= *budget.max_wall_time;
            if (out_of_reports || out_of_time) {
                out.complete = false;
                return out;
            }
            ScenarioConfig c;
            c.scenario_id = id;
            c.d_true = cell.d;
            c.epsilon = opts.epsilon.value_or(default_epsilon(id));
            c.sigma2_pair = cell.sigma2_pair;
            c.n_pair = cell.n_pair;
            c.arm = arm;
            c.n_sim = opts.n_sim;
            c.n_boot = opts.n_boot;
            c.alpha = opts.alpha;
            c.seed = opts.seed;
            c.grid_points = opts.grid_points;
            c.threads = opts.threads;
            c.average = opts.average;
            out.reports.push_back(run_cell(c));
        }
    }
    return out;
}

void write_reports_csv(std::ostream& out, std::span<const ScenarioReport> reports) {
    out << "scenario,arm,d,sigma1sq,sigma2sq,n1,n2,epsilon,alpha,n_sim,rejections,rate,mc_stderr,seed\n";
    for (const ScenarioReport& r : reports) {
        const ScenarioConfig& c = r.config;
        out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{},{},{:.17g},{:.17g},{},{},{:.17g},{:.17g},{}\n",
                           scenario_name(c.scenario_id), arm_name(c.arm), c.d_true, c.sigma2_pair.first,
                           c.sigma2_pair.second, c.n_pair.first, c.n_pair.second, c.epsilon, c.alpha,
                           c.n_sim, r.rejections, r.rejection_rate, r.mc_stderr, c.seed);
    }
}

}  // namespace maeq
