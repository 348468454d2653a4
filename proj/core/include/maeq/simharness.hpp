#pragma once

// Monte-Carlo operating characteristics of the hybrid equivalence test for
// the emax-vs-exponential and shifted-curve scenarios on doses {0,...,4}.

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "maeq/eqtest.hpp"

namespace maeq {

enum class ScenarioId { S1_EmaxVsExp, S2_ShiftedEmax, S3_ShiftedExp };

/// Test arm: which candidate models each group is analysed with.
///   S1: MisspecA = exp/exp, MisspecB = emax/emax, MisspecSwap = exp/emax.
///   S2, S3: MisspecA = wrong/correct, MisspecB = correct/wrong,
///           MisspecBoth = wrong/wrong.
enum class Arm { TrueModels, MisspecA, MisspecB, MisspecSwap, MisspecBoth, ModelAveraging };

std::string_view scenario_name(ScenarioId id) noexcept;  // "s1", "s2", "s3"
ScenarioId parse_scenario(std::string_view name);
std::string_view arm_name(Arm arm) noexcept;  // "true", "misspec_a", ..., "ma"
Arm parse_arm(std::string_view name);

/// Arms defined for a scenario, in reporting order.
std::vector<Arm> legal_arms(ScenarioId id);

struct ScenarioConfig {
    ScenarioId scenario_id = ScenarioId::S1_EmaxVsExp;
    double d_true = 1.0;
    double epsilon = 1.0;
    std::pair<double, double> sigma2_pair{0.25, 0.25};
    std::pair<std::size_t, std::size_t> n_pair{50, 50};
    Arm arm = Arm::TrueModels;
    std::size_t n_sim = 500;
    std::size_t n_boot = 300;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    std::size_t grid_points = 501;
    std::size_t threads = 1;  ///< workers over simulation runs; 0 = all cores
    AverageOptions average;
};

struct ScenarioReport {
    ScenarioConfig config;
    std::size_t rejections = 0;
    double rejection_rate = 0.0;
    double mc_stderr = 0.0;
    std::size_t n_effective = 0;  ///< runs whose test completed
    std::size_t n_failed = 0;     ///< runs whose test errored (counted as non-rejections)
    double mean_d_hat = 0.0;      ///< over completed runs
};

enum class Preset { Desk, Full };
Preset parse_preset(std::string_view name);
/// (n_sim, n_boot): desk 500/300, full 1000/500.
std::pair<std::size_t, std::size_t> preset_sizes(Preset p);

double default_epsilon(ScenarioId id) noexcept;
std::vector<double> d_values(ScenarioId id);
std::vector<double> null_d_values(ScenarioId id);
std::vector<double> alternative_d_values(ScenarioId id);
std::vector<std::pair<double, double>> sigma2_pairs();
std::vector<std::pair<std::size_t, std::size_t>> n_pairs();

/// True data-generating curves for both groups; group 2 of S1 is
/// exp(beta20, 2.2, 8) with beta20 chosen from d_true.
struct ScenarioTruth {
    ModelSpec spec1;
    ParamVector theta1;
    ModelSpec spec2;
    ParamVector theta2;
};
ScenarioTruth scenario_truth(const ScenarioConfig& config);

/// Candidate sets (group 1, group 2) for the configured arm.
std::pair<std::vector<ModelSpec>, std::vector<ModelSpec>> arm_candidates(const ScenarioConfig& config);

/// Throws ConfigError unless the configuration lies on the scenario grid.
void validate(const ScenarioConfig& config);

/// Per-run seeds depend on the cell (scenario, d, variances, sample sizes),
/// the master seed and the run index, not on the arm, so arms of one cell
/// are analysed on identical simulated data.
std::uint64_t cell_seed(const ScenarioConfig& config);

ScenarioReport run_cell(const ScenarioConfig& config);

struct Cell {
    double d = 1.0;
    std::pair<double, double> sigma2_pair{0.25, 0.25};
    std::pair<std::size_t, std::size_t> n_pair{50, 50};
};

/// All (d, variance, sample size) cells of a scenario, optionally limited to
/// the given d values.
std::vector<Cell> scenario_cells(ScenarioId id, std::span<const double> d_subset = {});

struct GridOptions {
    std::size_t n_sim = 500;
    std::size_t n_boot = 300;
    double alpha = 0.05;
    std::optional<double> epsilon;  ///< scenario default when unset
    std::uint64_t seed = 1;
    std::size_t grid_points = 501;
    std::size_t threads = 1;
    AverageOptions average;
};

struct Budget {
    std::optional<std::size_t> max_reports;
    std::optional<std::chrono::duration<double>> max_wall_time;
};

struct GridReport {
    std::vector<ScenarioReport> reports;
    std::size_t n_planned = 0;
    bool complete = true;
};

/// One report per (cell, arm), cells outermost. Stops early, marking the
/// result incomplete, once the budget is spent.
GridReport run_grid(ScenarioId id, std::span<const Arm> arms, std::span<const Cell> cells,
                    const GridOptions& opts, const Budget& budget = {});

/// Tidy CSV: scenario, arm, d, sigma1sq, sigma2sq, n1, n2, epsilon, alpha,
/// n_sim, rejections, rate, mc_stderr, seed.
void write_reports_csv(std::ostream& out, std::span<const ScenarioReport> reports);

}  // namespace maeq
