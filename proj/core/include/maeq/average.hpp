#pragma once

// Smooth information-criterion weights and the model-averaged curve.

#include <span>
#include <vector>

#include "maeq/fit.hpp"

namespace maeq {

/// Variance that drives parametric bootstrap data for an averaged curve.
enum class VarianceSource {
    WeightedAverage,  ///< sum_k w_k * sigma2_hat_k
    BestModel,        ///< sigma2_hat of the highest-weight model
    PooledResidual,   ///< mean squared residual about the averaged curve
};

/// w_k proportional to exp(-0.5 * (IC_k - min IC)). Non-finite or +inf
/// entries get weight zero; -inf entries (exact fits) share the mass.
/// Throws std::invalid_argument when empty or when every entry is unusable.
std::vector<double> compute_weights(std::span<const double> ics);

class AveragedCurve {
public:
    AveragedCurve(std::vector<FitResult> fits, std::vector<double> weights, Criterion criterion,
                  double sigma2_group);

    const std::vector<FitResult>& fits() const noexcept { return fits_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    Criterion criterion() const noexcept { return criterion_; }
    double sigma2_group() const noexcept { return sigma2_group_; }
    std::size_t size() const noexcept { return fits_.size(); }

    /// Weight of `family`, zero if it is not in the ensemble.
    double weight_of(Family family) const noexcept;

private:
    std::vector<FitResult> fits_;
    std::vector<double> weights_;
    Criterion criterion_;
    double sigma2_group_;
};

double eval_averaged(const AveragedCurve& curve, double x);

struct AverageOptions {
    Criterion criterion = Criterion::AIC;
    VarianceSource variance = VarianceSource::WeightedAverage;
    FitOptions fit;
    /// Throw FitFailure instead of dropping a candidate that fails to converge.
    bool strict = false;
};

/// Fits every candidate that the design can identify, drops failed fits and
/// averages the rest. `warm_starts`, if non-empty, holds one extra start per
/// candidate (matched by family). Throws std::runtime_error if no candidate
/// yields a converged fit.
AveragedCurve fit_averaged(const GroupData& data, std::span<const ModelSpec> candidates,
                           const AverageOptions& opts = {},
                           const AveragedCurve* warm_starts = nullptr);

/// Builds the ensemble from existing fits (all must belong to `data`).
AveragedCurve average_fits(std::vector<FitResult> fits, const GroupData& data,
                           Criterion criterion, VarianceSource variance);

}  // namespace maeq
