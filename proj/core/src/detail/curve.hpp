#pragma once

#include "maeq/average.hpp"

namespace maeq::detail {

/// Every family's domain is an interval, so checking both ends of [lo, hi]
/// covers all doses in between. Throws DomainError.
void check_curve_domain(const AveragedCurve& curve, double lo, double hi);

/// eval_averaged without per-point domain checks.
double eval_averaged_unchecked(const AveragedCurve& curve, double x);

}  // namespace maeq::detail
