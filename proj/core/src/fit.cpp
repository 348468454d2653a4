#include "maeq/fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "detail/start.hpp"
#include "maeq/errors.hpp"
#include "maeq/rng.hpp"

namespace maeq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using SmallMatrix = std::array<std::array<double, kMaxParams>, kMaxParams>;

// In-place Cholesky solve of the leading n x n block; false unless positive definite.
bool cholesky_solve(SmallMatrix& a, std::array<double, kMaxParams>& b, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j][j];
        for (std::size_t q = 0; q < j; ++q) d -= a[j][q] * a[j][q];
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        a[j][j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i][j];
            for (std::size_t q = 0; q < j; ++q) v -= a[i][q] * a[j][q];
            a[i][j] = v / a[j][j];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < i; ++q) b[i] -= a[i][q] * b[q];
        b[i] /= a[i][i];
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t q = i + 1; q < n; ++q) b[i] -= a[q][i] * b[q];
        b[i] /= a[i][i];
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(b[i])) return false;
    return true;
}

bool is_linear_family(Family f) { return f == Family::Linear || f == Family::Quadratic; }

// Weighted squared deviation of the level means from the curve; the residual
// sum of squares is this plus the within-level sum of squares.
double between_ss(const ModelSpec& spec, const ParamVector& theta, const LevelSummary& s) {
    try {
        check_params(spec, theta);
        for (double x : s.levels) detail::check_dose(spec, theta, x);
    } catch (const DomainError&) {
        return kInf;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < s.n_levels(); ++i) {
        const double r = s.means[i] - detail::eval_unchecked(spec, theta, s.levels[i]);
        acc += s.counts[i] * r * r;
    }
    return std::isfinite(acc) ? acc : kInf;
}

void clamp_to(ParamVector& theta, const ParamBounds& b) {
    for (std::size_t j = 0; j < theta.size(); ++j)
        theta[j] = detail::clamp_into(theta[j], b.lower[j], b.upper[j]);
}

struct LmOutcome {
    ParamVector theta;
    double between = kInf;
    bool converged = false;
    std::size_t iterations = 0;
};

// Box-constrained Levenberg-Marquardt. Parameters at a bound whose descent
// direction points outward are held fixed for the step.
LmOutcome levenberg_marquardt(const ModelSpec& spec, const LevelSummary& s,
                              const ParamBounds& bounds, ParamVector theta,
                              const FitOptions& opts) {
    const std::size_t p = spec.param_dim();
    const std::size_t k = s.n_levels();
    clamp_to(theta, bounds);
    LmOutcome out{theta, between_ss(spec, theta, s), false, 0};
    if (!std::isfinite(out.between)) return out;

    double lambda = 1e-3;
    SmallMatrix jtj{};
    std::array<double, kMaxParams> g{};
    Gradient grad(p);
    for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
        out.iterations = iter + 1;
        const double rss = s.within_ss + out.between;
        if (rss <= 0.0) {
            out.converged = true;
            return out;
        }

        jtj = {};
        g = {};
        // out.theta always has a finite objective, so it passed the domain checks
        for (std::size_t i = 0; i < k; ++i) {
            const double m = detail::eval_with_gradient_unchecked(spec, out.theta, s.levels[i], grad);
            const double w = s.counts[i];
            const double r = s.means[i] - m;
            for (std::size_t a = 0; a < p; ++a) {
                g[a] += w * r * grad[a];
                for (std::size_t b = 0; b <= a; ++b) jtj[a][b] += w * grad[a] * grad[b];
            }
        }
        for (std::size_t a = 0; a < p; ++a) {
            if (!std::isfinite(g[a])) return out;
            for (std::size_t b = a + 1; b < p; ++b) jtj[a][b] = jtj[b][a];
        }

        std::array<bool, kMaxParams> is_free{};
        std::size_t n_free = 0;
        double proj_grad = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const bool pinned_low = out.theta[j] <= bounds.lower[j] && g[j] < 0.0;
            const bool pinned_high = out.theta[j] >= bounds.upper[j] && g[j] > 0.0;
            is_free[j] = !(pinned_low || pinned_high);
            if (is_free[j]) {
                ++n_free;
                proj_grad = std::max(proj_grad, std::abs(g[j]));
            }
        }
        if (n_free == 0 || proj_grad <= opts.grad_tol * (1.0 + rss)) {
            out.converged = true;
            return out;
        }

        std::array<std::size_t, kMaxParams> idx{};
        for (std::size_t j = 0, q = 0; j < p; ++j)
            if (is_free[j]) idx[q++] = j;
        double max_diag = 0.0;
        for (std::size_t u = 0; u < n_free; ++u) max_diag = std::max(max_diag, jtj[idx[u]][idx[u]]);
        const double diag_floor = 1e-12 * max_diag + std::numeric_limits<double>::min();

        bool accepted = false;
        while (!accepted) {
            SmallMatrix damped{};
            std::array<double, kMaxParams> step{};
            for (std::size_t u = 0; u < n_free; ++u) {
                step[u] = g[idx[u]];
                for (std::size_t v = 0; v < n_free; ++v) damped[u][v] = jtj[idx[u]][idx[v]];
                damped[u][u] += lambda * std::max(jtj[idx[u]][idx[u]], diag_floor);
            }
            ParamVector cand = out.theta;
            if (cholesky_solve(damped, step, n_free)) {
                for (std::size_t u = 0; u < n_free; ++u) cand[idx[u]] += step[u];
                clamp_to(cand, bounds);
                const double cand_between = between_ss(spec, cand, s);
                if (cand_between < out.between) {
                    const double rel = (out.between - cand_between) / rss;
                    out.theta = cand;
                    out.between = cand_between;
                    lambda = std::max(lambda * 0.1, 1e-15);
                    accepted = true;
                    if (rel < opts.rel_tol) {
                        out.converged = true;
                        return out;
                    }
                    continue;
                }
            }
            lambda *= 10.0;
            if (lambda > 1e15) {
                // no descent step exists at machine precision: stationary
                out.converged = true;
                return out;
            }
        }
    }
    return out;
}

void check_design(const ModelSpec& spec, const LevelSummary& s) {
    if (!fittable(spec, s.n_levels()))
        throw InsufficientDesign(std::string(family_name(spec.family)) + " needs at least " +
                                 std::to_string(spec.param_dim() + 1) +
                                 " distinct dose levels, design has " +
                                 std::to_string(s.n_levels()));
    if (spec.family == Family::Beta && !(spec.scale_s > s.levels.back()))
        throw DomainError("beta: scale s must exceed the largest dose");
}

double resolve_max_dose(const LevelSummary& s, const FitOptions& opts) {
    return opts.max_dose.value_or(s.levels.back());
}

}  // namespace

bool fittable(const ModelSpec& spec, std::size_t n_distinct_levels) noexcept {
    return n_distinct_levels >= spec.param_dim() + 1;
}

double log_likelihood(double rss, std::size_t n, double sigma2) {
    if (!(sigma2 > 0.0)) throw DomainError("log_likelihood: variance must be positive");
    if (n == 0) throw DomainError("log_likelihood: no observations");
    if (rss < 0.0) throw DomainError("log_likelihood: negative residual sum of squares");
    const double nd = static_cast<double>(n);
    return -0.5 * nd * std::log(2.0 * std::numbers::pi * sigma2) - rss / (2.0 * sigma2);
}

double information_criterion(const FitResult& fit, Criterion kind) {
    const double k = static_cast<double>(fit.spec.param_dim() + 1);
    switch (kind) {
        case Criterion::AIC: return -2.0 * fit.loglik + 2.0 * k;
        case Criterion::BIC: return -2.0 * fit.loglik + std::log(static_cast<double>(fit.n)) * k;
    }
    return fit.aic;
}

double residual_sum_of_squares(const GroupData& data, const ModelSpec& spec,
                               const ParamVector& theta) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = data.responses[i] - eval_model(spec, theta, data.doses[i]);
        acc += r * r;
    }
    return acc;
}

std::vector<ParamVector> multistart_points(const LevelSummary& s, const ModelSpec& spec,
                                           const FitOptions& opts) {
    const double max_dose = resolve_max_dose(s, opts);
    std::vector<ParamVector> starts;
    starts.push_back(detail::default_start(spec, s, opts.bounds, max_dose));
    if (is_linear_family(spec.family) || opts.n_starts <= 1) return starts;

    const ParamBounds bounds = param_bounds(spec, max_dose, opts.bounds);
    const std::size_t p = spec.param_dim();
    const std::size_t n_extra = opts.n_starts - 1;
    Engine eng(derive_seed(opts.multistart_seed, static_cast<std::uint64_t>(spec.family)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // Latin hypercube over the shape parameters, log-spaced within bounds
    std::vector<std::vector<std::size_t>> perms(p);
    for (std::size_t j = 2; j < p; ++j) {
        perms[j].resize(n_extra);
        std::iota(perms[j].begin(), perms[j].end(), std::size_t{0});
        std::shuffle(perms[j].begin(), perms[j].end(), eng);
    }
    for (std::size_t r = 0; r < n_extra; ++r) {
        ParamVector theta = starts.front();
        for (std::size_t j = 2; j < p; ++j) {
            const double u = (static_cast<double>(perms[j][r]) + unif(eng)) /
                             static_cast<double>(n_extra);
            const double lo = std::log(bounds.lower[j]);
            const double hi = std::log(bounds.upper[j]);
            theta[j] = std::exp(lo + u * (hi - lo));
        }
        if (!detail::solve_linear_part(spec, theta, s, true)) {
            theta[0] = starts.front()[0];
            theta[1] = starts.front()[1];
        }
        starts.push_back(theta);
    }
    return starts;
}

FitResult fit_model(const LevelSummary& s, const ModelSpec& spec, const FitOptions& opts,
                    std::span<const ParamVector> extra_starts) {
    check_design(spec, s);
    const double max_dose = resolve_max_dose(s, opts);
    const ParamBounds bounds = param_bounds(spec, max_dose, opts.bounds);

    std::vector<ParamVector> starts = multistart_points(s, spec, opts);
    for (const ParamVector& e : extra_starts)
        if (e.size() == spec.param_dim()) starts.push_back(e);

    LmOutcome best;
    std::size_t total_iter = 0;
    for (const ParamVector& start : starts) {
        LmOutcome o = levenberg_marquardt(spec, s, bounds, start, opts);
        total_iter += o.iterations;
        if (o.between < best.between) best = o;
    }

    FitResult fit;
    fit.spec = spec;
    fit.n = s.n_obs;
    fit.iterations = total_iter;
    if (!std::isfinite(best.between)) {
        fit.theta_hat = starts.front();
        fit.rss = kInf;
        fit.sigma2_hat = kInf;
        fit.loglik = -kInf;
        fit.aic = fit.bic = kInf;
        return fit;
    }
    fit.theta_hat = best.theta;
    fit.converged = best.converged;
    fit.rss = std::max(0.0, s.within_ss + best.between);
    fit.sigma2_hat = fit.rss / static_cast<double>(fit.n);
    fit.loglik = fit.sigma2_hat > 0.0 ? log_likelihood(fit.rss, fit.n, fit.sigma2_hat) : kInf;
    fit.aic = information_criterion(fit, Criterion::AIC);
    fit.bic = information_criterion(fit, Criterion::BIC);
    return fit;
}

FitResult fit_model(const GroupData& data, const ModelSpec& spec, const FitOptions& opts,
                    std::span<const ParamVector> extra_starts) {
    const LevelSummary s = summarize_levels(data);
    FitResult fit = fit_model(s, spec, opts, extra_starts);
    if (std::isfinite(fit.rss)) {
        // report the residual sum of squares over the raw observations
        fit.rss = residual_sum_of_squares(data, spec, fit.theta_hat);
        fit.sigma2_hat = fit.rss / static_cast<double>(fit.n);
        fit.loglik = fit.sigma2_hat > 0.0 ? log_likelihood(fit.rss, fit.n, fit.sigma2_hat) : kInf;
        fit.aic = information_criterion(fit, Criterion::AIC);
        fit.bic = information_criterion(fit, Criterion::BIC);
    }
    return fit;
}

}  // namespace maeq
