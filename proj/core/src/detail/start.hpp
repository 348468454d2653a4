#pragma once

#include "maeq/data.hpp"
#include "maeq/models.hpp"

namespace maeq::detail {

ParamVector default_start(const ModelSpec& spec, const LevelSummary& summary,
                          const BoundsPolicy& policy, double max_dose);

/// Least-squares intercept/effect for fixed shape parameters, using the
/// level means weighted by `weights` (pass counts or ones). Returns false
/// when the design cannot separate the two.
bool solve_linear_part(const ModelSpec& spec, ParamVector& theta, const LevelSummary& summary,
                       bool weighted);

/// Evaluation without parameter or domain checks. Callers validate theta
/// with check_params and every dose with check_dose beforehand.
double eval_unchecked(const ModelSpec& spec, const ParamVector& theta, double x);
double eval_with_gradient_unchecked(const ModelSpec& spec, const ParamVector& theta, double x,
                                    Gradient& grad);
void check_dose(const ModelSpec& spec, const ParamVector& theta, double x);

double clamp_into(double v, double lo, double hi) noexcept;

}  // namespace maeq::detail
