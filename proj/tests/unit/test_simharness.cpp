#include <catch_amalgamated.hpp>
#include <sstream>

#include "maeq/errors.hpp"
#include "maeq/simharness.hpp"

using namespace maeq;
using Catch::Matchers::WithinAbs;

namespace {

ScenarioConfig small(ScenarioId id, Arm arm, double d) {
    ScenarioConfig c;
    c.scenario_id = id;
    c.d_true = d;
    c.epsilon = default_epsilon(id);
    c.arm = arm;
    c.n_pair = {10, 10};
    c.n_sim = 12;
    c.n_boot = 30;
    c.seed = 42;
    return c;
}

}  // namespace

TEST_CASE("scenario grids", "[simharness]") {
    CHECK(null_d_values(ScenarioId::S1_EmaxVsExp) == std::vector<double>{1.5, 1.25, 1.0});
    CHECK(alternative_d_values(ScenarioId::S1_EmaxVsExp) == std::vector<double>{0.75, 0.5});
    CHECK(null_d_values(ScenarioId::S2_ShiftedEmax) == std::vector<double>{1.0, 0.75, 0.5});
    CHECK(alternative_d_values(ScenarioId::S3_ShiftedExp) == std::vector<double>{0.25, 0.1, 0.0});

    const auto nulls = null_d_values(ScenarioId::S1_EmaxVsExp);
    const auto cells = scenario_cells(ScenarioId::S1_EmaxVsExp, nulls);
    const auto arms = legal_arms(ScenarioId::S1_EmaxVsExp);
    CHECK(cells.size() == 36);
    CHECK(arms.size() == 5);
    GridOptions g;
    const GridReport planned = run_grid(ScenarioId::S1_EmaxVsExp, arms, cells, g, Budget{0, {}});
    CHECK(planned.n_planned == 180);
    CHECK_FALSE(planned.complete);
    CHECK(planned.reports.empty());

    const GridReport none = run_grid(ScenarioId::S1_EmaxVsExp, {}, cells, g);
    CHECK(none.reports.empty());
    CHECK(none.complete);
}

TEST_CASE("scenario truths", "[simharness]") {
    ScenarioConfig c = small(ScenarioId::S1_EmaxVsExp, Arm::TrueModels, 1.25);
    ScenarioTruth t = scenario_truth(c);
    CHECK(t.spec1.family == Family::Emax);
    CHECK(t.theta1 == ParamVector{1.0, 2.0, 1.0});
    CHECK(t.theta2 == ParamVector{0.5, 2.2, 8.0});
    c = small(ScenarioId::S3_ShiftedExp, Arm::TrueModels, 0.25);
    t = scenario_truth(c);
    CHECK(t.theta1 == ParamVector{0.25, 2.2, 8.0});
    CHECK(t.theta2 == ParamVector{0.0, 2.2, 8.0});
}

TEST_CASE("arm candidate sets", "[simharness]") {
    auto fam = [](const std::vector<ModelSpec>& v) {
        std::vector<Family> out;
        for (const ModelSpec& s : v) out.push_back(s.family);
        return out;
    };
    using F = std::vector<Family>;
    auto check = [&](ScenarioId id, Arm arm, F a, F b) {
        const auto [c1, c2] = arm_candidates(small(id, arm, id == ScenarioId::S1_EmaxVsExp ? 1.0 : 0.5));
        CHECK(fam(c1) == a);
        CHECK(fam(c2) == b);
    };
    const auto E = Family::Emax, X = Family::Exp;
    check(ScenarioId::S1_EmaxVsExp, Arm::TrueModels, {E}, {X});
    check(ScenarioId::S1_EmaxVsExp, Arm::MisspecA, {X}, {X});
    check(ScenarioId::S1_EmaxVsExp, Arm::MisspecB, {E}, {E});
    check(ScenarioId::S1_EmaxVsExp, Arm::MisspecSwap, {X}, {E});
    check(ScenarioId::S1_EmaxVsExp, Arm::ModelAveraging, {E, X}, {E, X});
    check(ScenarioId::S2_ShiftedEmax, Arm::MisspecA, {X}, {E});
    check(ScenarioId::S2_ShiftedEmax, Arm::MisspecB, {E}, {X});
    check(ScenarioId::S2_ShiftedEmax, Arm::MisspecBoth, {X}, {X});
    check(ScenarioId::S3_ShiftedExp, Arm::MisspecA, {E}, {X});
    check(ScenarioId::S3_ShiftedExp, Arm::MisspecBoth, {E}, {E});
}

TEST_CASE("configuration errors", "[simharness]") {
    CHECK_THROWS_AS(run_cell(small(ScenarioId::S2_ShiftedEmax, Arm::MisspecSwap, 0.5)), ConfigError);
    CHECK_THROWS_AS(run_cell(small(ScenarioId::S1_EmaxVsExp, Arm::MisspecBoth, 1.0)), ConfigError);
    ScenarioConfig c = small(ScenarioId::S1_EmaxVsExp, Arm::TrueModels, 0.9);
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small(ScenarioId::S1_EmaxVsExp, Arm::TrueModels, 1.0);
    c.n_pair = {15, 15};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.n_pair = {10, 20};
    c.sigma2_pair = {0.5, 0.25};
    CHECK_THROWS_AS(validate(c), ConfigError);
    CHECK_THROWS_AS(parse_arm("wrong"), ConfigError);
    CHECK(parse_arm("misspec_swap") == Arm::MisspecSwap);
    CHECK(parse_scenario("s3") == ScenarioId::S3_ShiftedExp);
    CHECK(preset_sizes(Preset::Desk) == std::pair<std::size_t, std::size_t>{500, 300});
    CHECK(preset_sizes(parse_preset("full")) == std::pair<std::size_t, std::size_t>{1000, 500});
}

TEST_CASE("cell reports are deterministic and consistent", "[simharness][property]") {
    const ScenarioConfig c = small(ScenarioId::S2_ShiftedEmax, Arm::TrueModels, 0.0);
    const ScenarioReport a = run_cell(c);
    const ScenarioReport b = run_cell(c);
    CHECK(a.rejections == b.rejections);
    CHECK(a.mean_d_hat == b.mean_d_hat);
    ScenarioConfig par = c;
    par.threads = 3;
    const ScenarioReport p = run_cell(par);
    CHECK(p.rejections == a.rejections);
    CHECK(p.mean_d_hat == a.mean_d_hat);

    CHECK(a.n_effective + a.n_failed == c.n_sim);
    CHECK(a.rejection_rate == static_cast<double>(a.rejections) / static_cast<double>(c.n_sim));
    CHECK_THAT(a.mc_stderr, WithinAbs(std::sqrt(a.rejection_rate * (1 - a.rejection_rate) / 12.0), 1e-15));

    ScenarioConfig other_arm = c;
    other_arm.arm = Arm::ModelAveraging;
    CHECK(cell_seed(other_arm) == cell_seed(c));
    ScenarioConfig other_cell = c;
    other_cell.d_true = 0.1;
    CHECK(cell_seed(other_cell) != cell_seed(c));
}

TEST_CASE("grid budget and CSV output", "[simharness]") {
    GridOptions g;
    g.n_sim = 3;
    g.n_boot = 20;
    g.seed = 1;
    const std::vector<double> d{0.0};
    const auto cells = scenario_cells(ScenarioId::S3_ShiftedExp, d);
    const std::vector<Arm> arms{Arm::TrueModels};
    const GridReport part = run_grid(ScenarioId::S3_ShiftedExp, arms, cells, g, Budget{2, {}});
    CHECK(part.reports.size() == 2);
    CHECK_FALSE(part.complete);
    CHECK(part.n_planned == cells.size());

    std::ostringstream os;
    write_reports_csv(os, part.reports);
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    CHECK(header == "scenario,arm,d,sigma1sq,sigma2sq,n1,n2,epsilon,alpha,n_sim,rejections,rate,mc_stderr,seed");
    std::getline(is, row);
    CHECK(row.rfind("s3,true,0,0.25,0.25,10,10,0.5,", 0) == 0);
}
