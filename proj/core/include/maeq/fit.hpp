#pragma once

// Least-squares / Gaussian maximum-likelihood fitting of a single candidate
// model to one group.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "maeq/data.hpp"
#include "maeq/models.hpp"

namespace maeq {

enum class Criterion { AIC, BIC };

struct FitOptions {
    std::size_t n_starts = 10;   ///< default start plus n_starts-1 Latin-hypercube points
    std::size_t max_iter = 500;  ///< per start
    double rel_tol = 1e-10;      ///< relative RSS change
    double grad_tol = 1e-8;      ///< projected gradient, relative to 1 + RSS
    /// Upper end of the dose range used to scale the shape bounds. Defaults
    /// to the largest dose in the data.
    std::optional<double> max_dose;
    BoundsPolicy bounds;
    std::uint64_t multistart_seed = 0x6d61657166697431ULL;
};

struct FitResult {
    ModelSpec spec;
    ParamVector theta_hat;
    double sigma2_hat = 0.0;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double rss = 0.0;
    std::size_t n = 0;
    bool converged = false;
    std::size_t iterations = 0;  ///< summed over starts
};

/// Fits `spec` to `data`, minimising the residual sum of squares inside the
/// family's box bounds. `extra_starts` are tried in addition to the
/// multistart set. Throws InsufficientDesign if the design has fewer than
/// param_dim + 1 distinct dose levels.
FitResult fit_model(const GroupData& data, const ModelSpec& spec, const FitOptions& opts = {},
                    std::span<const ParamVector> extra_starts = {});

/// Same as fit_model on pre-summarised data.
FitResult fit_model(const LevelSummary& summary, const ModelSpec& spec, const FitOptions& opts,
                    std::span<const ParamVector> extra_starts = {});

/// Gaussian log-likelihood with the double sum replaced by `rss`.
double log_likelihood(double rss, std::size_t n, double sigma2);

double information_criterion(const FitResult& fit, Criterion kind);

/// Residual sum of squares of theta over the raw observations.
double residual_sum_of_squares(const GroupData& data, const ModelSpec& spec,
                               const ParamVector& theta);

bool fittable(const ModelSpec& spec, std::size_t n_distinct_levels) noexcept;

/// Starting points that fit_model tries (default start first).
std::vector<ParamVector> multistart_points(const LevelSummary& summary, const ModelSpec& spec,
                                           const FitOptions& opts);

}  // namespace maeq
