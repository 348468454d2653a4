#include "maeq/eqtest.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <spdlog/spdlog.h>
#include <stdexcept>

#include "detail/curve.hpp"
#include "maeq/errors.hpp"
#include "maeq/parallel.hpp"

namespace maeq {

namespace {

constexpr double kGoldenTol = 1e-8;

GroupData draw(const AveragedCurve& curve, const GroupData& design, Engine& engine) {
    GroupData out;
    out.group_label = design.group_label;
    out.doses = design.doses;
    out.responses.resize(design.size());
    const double sd = std::sqrt(curve.sigma2_group());
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < design.size(); ++i) {
        const double mean = eval_averaged(curve, design.doses[i]);
        out.responses[i] = sd > 0.0 ? mean + sd * noise(engine) : mean;
    }
    return out;
}

double sample_sd(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (n - 1.0));
}

// Linear-interpolation quantile of a sorted sample (diagnostics only).
double interp_quantile(const std::vector<double>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DoseGrid analysis_grid(const GroupData& a, const GroupData& b, const TestOptions& opts) {
    if (opts.range) return DoseGrid(opts.range->first, opts.range->second, opts.grid_points);
    return DoseGrid(std::min(a.min_dose(), b.min_dose()), std::max(a.max_dose(), b.max_dose()),
                    opts.grid_points);
}

}  // namespace

std::string_view method_name(CiMethod m) noexcept {
    return m == CiMethod::Hybrid ? "hybrid" : "percentile";
}

CiMethod parse_method(std::string_view name) {
    if (name == "hybrid") return CiMethod::Hybrid;
    if (name == "percentile") return CiMethod::Percentile;
    throw ConfigError("unknown CI method '" + std::string(name) + "'");
}

DistanceResult max_abs_deviation(const AveragedCurve& curve1, const AveragedCurve& curve2,
                                 const DoseGrid& grid) {
    detail::check_curve_domain(curve1, grid.lower(), grid.upper());
    detail::check_curve_domain(curve2, grid.lower(), grid.upper());
    auto gap = [&](double x) {
        return std::abs(detail::eval_averaged_unchecked(curve1, x) -
                        detail::eval_averaged_unchecked(curve2, x));
    };

    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = gap(grid.at(i));
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    DistanceResult out{best_val, grid.at(best), grid};

    double a = grid.at(best == 0 ? 0 : best - 1);
    double b = grid.at(std::min(best + 1, grid.size() - 1));
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = gap(c);
    double fd = gap(d);
    while (b - a > kGoldenTol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = gap(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = gap(d);
        }
    }
    const double x_ref = 0.5 * (a + b);
    const double f_ref = gap(x_ref);
    if (f_ref > out.d_hat) {
        out.d_hat = f_ref;
        out.x_at_max = x_ref;
    }
    return out;
}

AveragedCurve single_model_curve(const ModelSpec& spec, const ParamVector& theta,
                                 double sigma2) {
    check_params(spec, theta);
    FitResult f;
    f.spec = spec;
    f.theta_hat = theta;
    f.sigma2_hat = sigma2;
    f.converged = true;
    return AveragedCurve({f}, {1.0}, Criterion::AIC, sigma2);
}

GroupData generate_bootstrap_data(const AveragedCurve& curve, const GroupData& design,
                                  Engine& engine) {
    if (curve.sigma2_group() == 0.0)
        spdlog::warn("group '{}': zero variance, bootstrap data are noiseless", design.group_label);
    return draw(curve, design, engine);
}

GroupData generate_bootstrap_data(const AveragedCurve& curve, const GroupData& design,
                                  std::uint64_t seed) {
    Engine engine = make_engine(seed);
    return generate_bootstrap_data(curve, design, engine);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double hybrid_upper(double d_hat, std::span<const double> boot_sample, double alpha) {
    if (boot_sample.size() < 2)
        throw BootstrapFailure("hybrid bound needs at least two bootstrap replicates");
    for (double v : boot_sample)
        if (!std::isfinite(v)) throw BootstrapFailure("non-finite bootstrap replicate");
    return d_hat + sample_sd(boot_sample) * normal_quantile(1.0 - alpha);
}

double percentile_upper(std::span<const double> boot_sample, double alpha) {
    if (boot_sample.empty()) throw BootstrapFailure("percentile bound needs a bootstrap sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha outside (0, 1)");
    std::vector<double> sorted(boot_sample.begin(), boot_sample.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw BootstrapFailure("non-finite bootstrap replicate");
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::floor(n * (1.0 - alpha) + 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

BootstrapSummary summarize_bootstrap(std::span<const double> sample) {
    BootstrapSummary s;
    if (sample.empty()) return s;
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    s.sd = sorted.size() > 1 ? sample_sd(sorted) : 0.0;
    s.q05 = interp_quantile(sorted, 0.05);
    s.q50 = interp_quantile(sorted, 0.50);
    s.q95 = interp_quantile(sorted, 0.95);
    return s;
}

void validate(const TestOptions& opts) {
    if (!(opts.epsilon >= 0.0) || !std::isfinite(opts.epsilon))
        throw ConfigError("epsilon must be a finite non-negative number");
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (opts.n_boot < 1) throw ConfigError("n_boot must be at least 1");
    if (opts.method == CiMethod::Hybrid && opts.n_boot < 2)
        throw ConfigError("hybrid bound needs n_boot >= 2");
    if (opts.grid_points < 2) throw ConfigError("grid needs at least 2 points");
    if (!(opts.max_drop_fraction >= 0.0 && opts.max_drop_fraction < 1.0))
        throw ConfigError("max_drop_fraction must lie in [0, 1)");
}

TestResult run_equivalence_test(const GroupData& data1, const GroupData& data2,
                                std::span<const ModelSpec> candidates1,
                                std::span<const ModelSpec> candidates2,
                                const TestOptions& opts) {
    validate(opts);
    if (candidates1.empty() || candidates2.empty())
        throw ConfigError("candidate model lists must be non-empty");
    data1.validate();
    data2.validate();
    const DoseGrid grid = analysis_grid(data1, data2, opts);

    AverageOptions avg = opts.average;
    avg.strict = false;
    const AveragedCurve curve1 = fit_averaged(data1, candidates1, avg);
    const AveragedCurve curve2 = fit_averaged(data2, candidates2, avg);
    const DistanceResult dist = max_abs_deviation(curve1, curve2, grid);

    for (const AveragedCurve* c : {&curve1, &curve2})
        if (c->sigma2_group() == 0.0)
            spdlog::warn("zero estimated variance, bootstrap data are noiseless");

    AverageOptions boot_avg = opts.average;
    boot_avg.strict = true;
    std::vector<double> replicates(opts.n_boot, std::numeric_limits<double>::quiet_NaN());
    parallel_for(opts.n_boot, opts.threads, [&](std::size_t r) {
        Engine engine = make_engine(derive_seed(opts.seed, r));
        const GroupData b1 = draw(curve1, data1, engine);
        const GroupData b2 = draw(curve2, data2, engine);
        try {
            const AveragedCurve c1 = fit_averaged(b1, candidates1, boot_avg, &curve1);
            const AveragedCurve c2 = fit_averaged(b2, candidates2, boot_avg, &curve2);
            replicates[r] = max_abs_deviation(c1, c2, grid).d_hat;
        } catch (const FitFailure& e) {
            spdlog::debug("bootstrap replicate {} dropped: {}", r, e.what());
        } catch (const DomainError& e) {
            spdlog::debug("bootstrap replicate {} dropped: {}", r, e.what());
        }
    });

    std::vector<double> sample;
    sample.reserve(opts.n_boot);
    for (double v : replicates)
        if (std::isfinite(v)) sample.push_back(v);
    const std::size_t dropped = opts.n_boot - sample.size();
    if (static_cast<double>(dropped) > opts.max_drop_fraction * static_cast<double>(opts.n_boot))
        throw BootstrapFailure(std::to_string(dropped) + " of " + std::to_string(opts.n_boot) +
                               " bootstrap replicates failed to converge");
    if (dropped > 0) spdlog::debug("{} bootstrap replicates dropped", dropped);

    TestResult res;
    res.d_hat = dist.d_hat;
    res.x_at_max = dist.x_at_max;
    res.method = opts.method;
    res.alpha = opts.alpha;
    res.epsilon = opts.epsilon;
    res.n_boot = opts.n_boot;
    res.n_boot_effective = sample.size();
    res.n_dropped = dropped;
    res.seed = opts.seed;
    res.boot_stats = summarize_bootstrap(sample);
    res.se = res.boot_stats.sd;
    res.u_hat = opts.method == CiMethod::Hybrid ? hybrid_upper(dist.d_hat, sample, opts.alpha)
                                                : percentile_upper(sample, opts.alpha);
    res.reject_h0 = opts.epsilon > res.u_hat;
    res.curves = {curve1, curve2};
    if (opts.keep_boot_sample) res.boot_sample = std::move(sample);
    return res;
}

}  // namespace maeq
