#pragma once

// Equivalence test of two regression curves with respect to their maximal
// absolute deviation, using a parametric-bootstrap confidence bound.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "maeq/average.hpp"
#include "maeq/rng.hpp"

namespace maeq {

enum class CiMethod { Percentile, Hybrid };

std::string_view method_name(CiMethod m) noexcept;
CiMethod parse_method(std::string_view name);

struct DistanceResult {
    double d_hat = 0.0;
    double x_at_max = 0.0;
    DoseGrid grid_used{0.0, 1.0, 2};
};

/// max over the grid of |m1(x) - m2(x)|, refined by golden-section search
/// in the cells adjacent to the best grid point. Ties go to the smallest x.
DistanceResult max_abs_deviation(const AveragedCurve& curve1, const AveragedCurve& curve2,
                                 const DoseGrid& grid);

/// Single-model "ensemble" with weight one, e.g. a known true curve.
AveragedCurve single_model_curve(const ModelSpec& spec, const ParamVector& theta,
                                 double sigma2);

/// New responses y* ~ N(m(x), sigma2_group) at every design dose.
GroupData generate_bootstrap_data(const AveragedCurve& curve, const GroupData& design,
                                  std::uint64_t seed);
GroupData generate_bootstrap_data(const AveragedCurve& curve, const GroupData& design,
                                  Engine& engine);

double normal_quantile(double p);

/// d_hat + sd(boot) * z_{1-alpha}; sd uses divisor n - 1.
double hybrid_upper(double d_hat, std::span<const double> boot_sample, double alpha);
/// Order statistic floor(n (1 - alpha)) of the bootstrap sample (1-based).
double percentile_upper(std::span<const double> boot_sample, double alpha);

struct BootstrapSummary {
    double mean = 0.0;
    double sd = 0.0;
    double q05 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
};

BootstrapSummary summarize_bootstrap(std::span<const double> sample);

struct TestOptions {
    double epsilon = 1.0;
    double alpha = 0.05;
    CiMethod method = CiMethod::Hybrid;
    std::size_t n_boot = 1000;
    std::size_t grid_points = 501;
    /// Covariate range; defaults to [min dose, max dose] over both groups.
    std::optional<std::pair<double, double>> range;
    std::uint64_t seed = 1;
    AverageOptions average;
    double max_drop_fraction = 0.10;
    std::size_t threads = 1;  ///< 0 = hardware concurrency
    bool keep_boot_sample = false;
};

struct TestResult {
    double d_hat = 0.0;
    double x_at_max = 0.0;
    double u_hat = 0.0;
    double se = 0.0;  ///< bootstrap standard deviation of d_hat*
    CiMethod method = CiMethod::Hybrid;
    double alpha = 0.05;
    double epsilon = 0.0;
    bool reject_h0 = false;
    std::size_t n_boot = 0;
    std::size_t n_boot_effective = 0;
    std::size_t n_dropped = 0;
    BootstrapSummary boot_stats;
    std::uint64_t seed = 0;
    std::vector<AveragedCurve> curves;  ///< fitted ensembles for group 1 and 2
    std::vector<double> boot_sample;    ///< only with keep_boot_sample
};

/// Runs the complete test: fit and average both groups, compute d_hat,
/// bootstrap n_boot replicates (each refitting every candidate), form the
/// upper bound and reject H0: d >= epsilon iff epsilon > u_hat.
TestResult run_equivalence_test(const GroupData& data1, const GroupData& data2,
                                std::span<const ModelSpec> candidates1,
                                std::span<const ModelSpec> candidates2,
                                const TestOptions& opts);

void validate(const TestOptions& opts);

}  // namespace maeq
