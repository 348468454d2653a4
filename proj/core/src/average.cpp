#include "maeq/average.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "detail/curve.hpp"
#include "detail/start.hpp"
#include "maeq/errors.hpp"

namespace maeq {

std::vector<double> compute_weights(std::span<const double> ics) {
    if (ics.empty()) throw std::invalid_argument("compute_weights: no information criteria");
    std::vector<double> w(ics.size(), 0.0);

    std::size_t n_exact = 0;
    for (double ic : ics)
        if (ic == -std::numeric_limits<double>::infinity()) ++n_exact;
    if (n_exact > 0) {
        for (std::size_t k = 0; k < ics.size(); ++k)
            if (ics[k] == -std::numeric_limits<double>::infinity())
                w[k] = 1.0 / static_cast<double>(n_exact);
        return w;
    }

    double min_ic = std::numeric_limits<double>::infinity();
    for (double ic : ics)
        if (std::isfinite(ic)) min_ic = std::min(min_ic, ic);
    if (!std::isfinite(min_ic))
        throw std::invalid_argument("compute_weights: no finite information criterion");

    double total = 0.0;
    for (std::size_t k = 0; k < ics.size(); ++k) {
        if (!std::isfinite(ics[k])) continue;
        w[k] = std::exp(-0.5 * (ics[k] - min_ic));
        total += w[k];
    }
    for (double& v : w) v /= total;
    return w;
}

AveragedCurve::AveragedCurve(std::vector<FitResult> fits, std::vector<double> weights,
                             Criterion criterion, double sigma2_group)
    : fits_(std::move(fits)),
      weights_(std::move(weights)),
      criterion_(criterion),
      sigma2_group_(sigma2_group) {
    if (fits_.empty()) throw std::invalid_argument("AveragedCurve: empty ensemble");
    if (fits_.size() != weights_.size())
        throw std::invalid_argument("AveragedCurve: fits and weights differ in length");
    if (!(sigma2_group_ >= 0.0)) throw std::invalid_argument("AveragedCurve: negative variance");
    for (const FitResult& f : fits_) check_params(f.spec, f.theta_hat);
}

double AveragedCurve::weight_of(Family family) const noexcept {
    double w = 0.0;
    for (std::size_t k = 0; k < fits_.size(); ++k)
        if (fits_[k].spec.family == family) w += weights_[k];
    return w;
}

double eval_averaged(const AveragedCurve& curve, double x) {
    double acc = 0.0;
    const auto& fits = curve.fits();
    const auto& w = curve.weights();
    for (std::size_t k = 0; k < fits.size(); ++k)
        if (w[k] > 0.0) {
            // parameters were validated on construction
            detail::check_dose(fits[k].spec, fits[k].theta_hat, x);
            acc += w[k] * detail::eval_unchecked(fits[k].spec, fits[k].theta_hat, x);
        }
    return acc;
}

namespace detail {

void check_curve_domain(const AveragedCurve& curve, double lo, double hi) {
    for (std::size_t k = 0; k < curve.size(); ++k) {
        if (curve.weights()[k] <= 0.0) continue;
        check_dose(curve.fits()[k].spec, curve.fits()[k].theta_hat, lo);
        check_dose(curve.fits()[k].spec, curve.fits()[k].theta_hat, hi);
    }
}

double eval_averaged_unchecked(const AveragedCurve& curve, double x) {
    double acc = 0.0;
    const auto& fits = curve.fits();
    const auto& w = curve.weights();
    for (std::size_t k = 0; k < fits.size(); ++k)
        if (w[k] > 0.0) acc += w[k] * eval_unchecked(fits[k].spec, fits[k].theta_hat, x);
    return acc;
}

}  // namespace detail

AveragedCurve average_fits(std::vector<FitResult> fits, const GroupData& data,
                           Criterion criterion, VarianceSource variance) {
    std::vector<double> ics;
    ics.reserve(fits.size());
    for (const FitResult& f : fits) ics.push_back(criterion == Criterion::AIC ? f.aic : f.bic);
    std::vector<double> w = compute_weights(ics);

    double sigma2 = 0.0;
    switch (variance) {
        case VarianceSource::WeightedAverage:
            for (std::size_t k = 0; k < fits.size(); ++k)
                if (w[k] > 0.0) sigma2 += w[k] * fits[k].sigma2_hat;
            break;
        case VarianceSource::BestModel:
            sigma2 = fits[static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin())]
                         .sigma2_hat;
            break;
        case VarianceSource::PooledResidual:
            break;
    }
    AveragedCurve curve(std::move(fits), std::move(w), criterion, 0.0);
    if (variance == VarianceSource::PooledResidual) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double r = data.responses[i] - eval_averaged(curve, data.doses[i]);
            sigma2 += r * r;
        }
        sigma2 /= static_cast<double>(data.size());
    }
    return AveragedCurve(curve.fits(), curve.weights(), criterion, sigma2);
}

AveragedCurve fit_averaged(const GroupData& data, std::span<const ModelSpec> candidates,
                           const AverageOptions& opts, const AveragedCurve* warm_starts) {
    if (candidates.empty()) throw std::invalid_argument("fit_averaged: no candidate models");
    const LevelSummary summary = summarize_levels(data);
    std::vector<FitResult> fits;
    fits.reserve(candidates.size());
    for (const ModelSpec& spec : candidates) {
        if (!fittable(spec, summary.n_levels())) {
            spdlog::warn("group '{}': excluding {} (design has {} distinct levels)",
                         data.group_label, family_name(spec.family), summary.n_levels());
            continue;
        }
        std::span<const ParamVector> extra;
        if (warm_starts) {
            for (const FitResult& prev : warm_starts->fits())
                if (prev.spec == spec) {
                    extra = std::span<const ParamVector>(&prev.theta_hat, 1);
                    break;
                }
        }
        FitResult fit = fit_model(summary, spec, opts.fit, extra);
        if (!fit.converged || !std::isfinite(fit.rss)) {
            if (opts.strict)
                throw FitFailure("group '" + data.group_label + "': " +
                                 std::string(family_name(spec.family)) + " did not converge");
            spdlog::debug("group '{}': dropping non-converged {} fit", data.group_label,
                          family_name(spec.family));
            continue;
        }
        fit.rss = residual_sum_of_squares(data, spec, fit.theta_hat);
        fit.sigma2_hat = fit.rss / static_cast<double>(fit.n);
        fit.loglik = fit.sigma2_hat > 0.0 ? log_likelihood(fit.rss, fit.n, fit.sigma2_hat)
                                          : std::numeric_limits<double>::infinity();
        fit.aic = information_criterion(fit, Criterion::AIC);
        fit.bic = information_criterion(fit, Criterion::BIC);
        fits.push_back(std::move(fit));
    }
    if (fits.empty())
        throw std::runtime_error("group '" + data.group_label + "': no candidate model could be fitted");
    return average_fits(std::move(fits), data, opts.criterion, opts.variance);
}

}  // namespace maeq
