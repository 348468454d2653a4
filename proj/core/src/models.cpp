#include "maeq/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "detail/start.hpp"
#include "maeq/errors.hpp"

namespace maeq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void domain_fail(const ModelSpec& spec, const std::string& what) {
    throw DomainError(std::string(family_name(spec.family)) + ": " + what);
}

void check_x(const ModelSpec& spec, const ParamVector& theta, double x) {
    if (!std::isfinite(x)) domain_fail(spec, "non-finite dose");
    switch (spec.family) {
        case Family::Emax:
            if (theta[2] + x <= 0.0) domain_fail(spec, "dose at or below -ED50");
            break;
        case Family::SigEmax:
            if (x < 0.0) domain_fail(spec, "negative dose");
            break;
        case Family::Beta:
            if (x < 0.0 || x >= spec.scale_s)
                domain_fail(spec, "dose " + std::to_string(x) + " outside [0, s) with s = " +
                                      std::to_string(spec.scale_s));
            break;
        default: break;
    }
}

// Normalising constant of the beta kernel and its partial derivatives.
struct BetaConst {
    double value;
    double d_a;
    double d_b;
};

BetaConst beta_constant(double a, double b) {
    const double sum = a + b;
    const double num = std::pow(sum, sum);
    const double aa = std::pow(a, a);
    const double bb = std::pow(b, b);
    const double den = aa + bb;
    const double value = num / den;
    const double common = std::log(sum) + 1.0;
    return {value, value * (common - aa * (std::log(a) + 1.0) / den),
            value * (common - bb * (std::log(b) + 1.0) / den)};
}

template <bool WithGrad, bool Checked = true>
double evaluate(const ModelSpec& spec, const ParamVector& theta, double x, Gradient* grad) {
    if constexpr (Checked) {
        check_params(spec, theta);
        check_x(spec, theta, x);
    }
    const double b0 = theta[0];
    const double b1 = theta[1];
    switch (spec.family) {
        case Family::Linear:
            if constexpr (WithGrad) {
                (*grad)[0] = 1.0;
                (*grad)[1] = x;
            }
            return b0 + b1 * x;
        case Family::Quadratic: {
            const double b2 = theta[2];
            if constexpr (WithGrad) {
                (*grad)[0] = 1.0;
                (*grad)[1] = x;
                (*grad)[2] = x * x;
            }
            return b0 + x * (b1 + x * b2);
        }
        case Family::Emax: {
            const double ed50 = theta[2];
            const double denom = ed50 + x;
            const double f = x / denom;
            if constexpr (WithGrad) {
                (*grad)[0] = 1.0;
                (*grad)[1] = f;
                (*grad)[2] = -b1 * x / (denom * denom);
            }
            return b0 + b1 * f;
        }
        case Family::Exp: {
            const double delta = theta[2];
            const double e = std::exp(x / delta);
            if constexpr (WithGrad) {
                (*grad)[0] = 1.0;
                (*grad)[1] = e - 1.0;
                (*grad)[2] = -b1 * e * x / (delta * delta);
            }
            return b0 + b1 * (e - 1.0);
        }
        case Family::SigEmax: {
            const double ed50 = theta[2];
            const double hill = theta[3];
            double f = 0.0;
            double log_ratio = 0.0;
            if (x > 0.0) {
                log_ratio = std::log(x / ed50);
                // x^h / (ed50^h + x^h) written as a logistic in h*log(x/ed50)
                f = 1.0 / (1.0 + std::exp(-hill * log_ratio));
            }
            if constexpr (WithGrad) {
                const double df = f * (1.0 - f);  // t / (1 + t)^2
                (*grad)[0] = 1.0;
                (*grad)[1] = f;
                (*grad)[2] = x > 0.0 ? -b1 * df * hill / ed50 : 0.0;
                (*grad)[3] = x > 0.0 ? b1 * df * log_ratio : 0.0;
            }
            return b0 + b1 * f;
        }
        case Family::Beta: {
            const double a = theta[2];
            const double b = theta[3];
            const BetaConst c = beta_constant(a, b);
            const double u = x / spec.scale_s;
            double kernel = 0.0;
            double log_u = 0.0;
            double log_1mu = 0.0;
            if (u > 0.0) {
                log_u = std::log(u);
                log_1mu = std::log1p(-u);
                kernel = std::exp(a * log_u + b * log_1mu);
            }
            if constexpr (WithGrad) {
                (*grad)[0] = 1.0;
                (*grad)[1] = c.value * kernel;
                (*grad)[2] = b1 * kernel * (c.d_a + c.value * log_u);
                (*grad)[3] = b1 * kernel * (c.d_b + c.value * log_1mu);
            }
            return b0 + b1 * c.value * kernel;
        }
    }
    domain_fail(spec, "unknown family");
}

}  // namespace

std::string_view family_name(Family f) noexcept {
    switch (f) {
        case Family::Linear: return "linear";
        case Family::Quadratic: return "quadratic";
        case Family::Emax: return "emax";
        case Family::Exp: return "exp";
        case Family::SigEmax: return "sigemax";
        case Family::Beta: return "beta";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "exponential") lower = "exp";
    for (Family f : kAllFamilies)
        if (family_name(f) == lower) return f;
    throw ConfigError("unknown model family '" + std::string(name) + "'");
}

std::vector<ModelSpec> make_candidates(std::span<const Family> families, double beta_scale) {
    std::vector<ModelSpec> out;
    out.reserve(families.size());
    for (Family f : families)
        out.push_back(f == Family::Beta ? ModelSpec::beta(beta_scale) : ModelSpec::of(f));
    return out;
}

ParamVector::ParamVector(std::initializer_list<double> values) : dim_(values.size()) {
    if (values.size() > kMaxParams) throw std::invalid_argument("ParamVector: too many values");
    std::copy(values.begin(), values.end(), v_.begin());
}

DoseGrid::DoseGrid(double lower, double upper, std::size_t n_points)
    : lower_(lower), upper_(upper), n_(n_points) {
    if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper))
        throw std::invalid_argument("DoseGrid: requires finite lower < upper");
    if (n_points < 2) throw std::invalid_argument("DoseGrid: requires at least 2 points");
}

std::vector<double> DoseGrid::points() const {
    std::vector<double> pts(n_);
    for (std::size_t i = 0; i < n_; ++i) pts[i] = at(i);
    return pts;
}

void check_params(const ModelSpec& spec, const ParamVector& theta) {
    if (theta.size() != spec.param_dim())
        domain_fail(spec, "expected " + std::to_string(spec.param_dim()) + " parameters, got " +
                              std::to_string(theta.size()));
    for (double v : theta.values())
        if (!std::isfinite(v)) domain_fail(spec, "non-finite parameter");
    switch (spec.family) {
        case Family::Emax:
            if (!(theta[2] > 0.0)) domain_fail(spec, "ED50 must be positive");
            break;
        case Family::Exp:
            if (theta[2] == 0.0) domain_fail(spec, "rate parameter must be non-zero");
            break;
        case Family::SigEmax:
            if (!(theta[2] > 0.0) || !(theta[3] > 0.0))
                domain_fail(spec, "ED50 and Hill must be positive");
            break;
        case Family::Beta:
            if (!(theta[2] > 0.0) || !(theta[3] > 0.0))
                domain_fail(spec, "shape parameters must be positive");
            if (!(spec.scale_s > 0.0)) domain_fail(spec, "scale s must be positive");
            break;
        default: break;
    }
}

double eval_model(const ModelSpec& spec, const ParamVector& theta, double x) {
    return evaluate<false>(spec, theta, x, nullptr);
}

Gradient eval_gradient(const ModelSpec& spec, const ParamVector& theta, double x) {
    Gradient g(spec.param_dim());
    evaluate<true>(spec, theta, x, &g);
    return g;
}

double eval_model_and_gradient(const ModelSpec& spec, const ParamVector& theta, double x,
                               Gradient& grad) {
    grad = Gradient(spec.param_dim());
    return evaluate<true>(spec, theta, x, &grad);
}

ParamBounds param_bounds(const ModelSpec& spec, double max_dose, const BoundsPolicy& policy) {
    const std::size_t p = spec.param_dim();
    ParamBounds b{ParamVector(p), ParamVector(p)};
    for (std::size_t j = 0; j < p; ++j) {
        b.lower[j] = -kInf;
        b.upper[j] = kInf;
    }
    const double d = max_dose > 0.0 ? max_dose : 1.0;
    switch (spec.family) {
        case Family::Emax:
            b.lower[2] = policy.ed50_lower * d;
            b.upper[2] = policy.ed50_upper * d;
            break;
        case Family::Exp:
            b.lower[2] = policy.exp_delta_lower * d;
            b.upper[2] = policy.exp_delta_upper * d;
            break;
        case Family::SigEmax:
            b.lower[2] = policy.ed50_lower * d;
            b.upper[2] = policy.ed50_upper * d;
            b.lower[3] = policy.hill_lower;
            b.upper[3] = policy.hill_upper;
            break;
        case Family::Beta:
            b.lower[2] = b.lower[3] = policy.shape_lower;
            b.upper[2] = b.upper[3] = policy.shape_upper;
            break;
        default: break;
    }
    return b;
}

ParamVector default_start(const ModelSpec& spec, const GroupData& data,
                          const BoundsPolicy& policy) {
    if (data.empty()) throw std::invalid_argument("default_start: empty data");
    const LevelSummary s = summarize_levels(data);
    return detail::default_start(spec, s, policy, s.levels.back());
}

namespace detail {

double eval_unchecked(const ModelSpec& spec, const ParamVector& theta, double x) {
    return evaluate<false, false>(spec, theta, x, nullptr);
}

double eval_with_gradient_unchecked(const ModelSpec& spec, const ParamVector& theta, double x,
                                    Gradient& grad) {
    return evaluate<true, false>(spec, theta, x, &grad);
}

void check_dose(const ModelSpec& spec, const ParamVector& theta, double x) { check_x(spec, theta, x); }

double clamp_into(double v, double lo, double hi) noexcept { return std::min(std::max(v, lo), hi); }

namespace {

double median_level(const LevelSummary& s) {
    const std::size_t k = s.n_levels();
    return k % 2 == 1 ? s.levels[k / 2] : 0.5 * (s.levels[k / 2 - 1] + s.levels[k / 2]);
}

// Ordinary polynomial least squares on the level means (unweighted).
void polynomial_start(ParamVector& theta, const LevelSummary& s, std::size_t degree) {
    const std::size_t k = s.n_levels();
    if (degree == 2 && k >= 3) {
        // 3x3 normal equations by Cramer's rule on centred doses
        double xm = 0.0;
        for (double x : s.levels) xm += x;
        xm /= static_cast<double>(k);
        double S[5] = {0, 0, 0, 0, 0};
        double T[3] = {0, 0, 0};
        for (std::size_t i = 0; i < k; ++i) {
            const double z = s.levels[i] - xm;
            double p = 1.0;
            for (int e = 0; e < 5; ++e) {
                S[e] += p;
                if (e < 3) T[e] += p * s.means[i];
                p *= z;
            }
        }
        const double m[3][3] = {{S[0], S[1], S[2]}, {S[1], S[2], S[3]}, {S[2], S[3], S[4]}};
        auto det3 = [](const double a[3][3]) {
            return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                   a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                   a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        };
        const double det = det3(m);
        if (std::abs(det) > 1e-300) {
            double c[3];
            for (int col = 0; col < 3; ++col) {
                double a[3][3];
                for (int r = 0; r < 3; ++r)
                    for (int q = 0; q < 3; ++q) a[r][q] = q == col ? T[r] : m[r][q];
                c[col] = det3(a) / det;
            }
            // back from centred coordinates: c0 + c1 z + c2 z^2, z = x - xm
            theta[0] = c[0] - c[1] * xm + c[2] * xm * xm;
            theta[1] = c[1] - 2.0 * c[2] * xm;
            theta[2] = c[2];
            return;
        }
    }
    double xm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        xm += s.levels[i];
        ym += s.means[i];
    }
    xm /= static_cast<double>(k);
    ym /= static_cast<double>(k);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (s.levels[i] - xm) * (s.levels[i] - xm);
        sxy += (s.levels[i] - xm) * (s.means[i] - ym);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    theta[0] = ym - slope * xm;
    theta[1] = slope;
    if (degree == 2) theta[2] = 0.0;
}

}  // namespace

bool solve_linear_part(const ModelSpec& spec, ParamVector& theta, const LevelSummary& s,
                       bool weighted) {
    // Regress level means on the effect regressor f(x) = (m(x) - b0) / b1.
    ParamVector unit = theta;
    unit[0] = 0.0;
    unit[1] = 1.0;
    double sw = 0.0, sf = 0.0, sy = 0.0;
    const std::size_t k = s.n_levels();
    std::vector<double> f(k);
    for (std::size_t i = 0; i < k; ++i) {
        f[i] = eval_model(spec, unit, s.levels[i]);
        const double w = weighted ? s.counts[i] : 1.0;
        sw += w;
        sf += w * f[i];
        sy += w * s.means[i];
    }
    const double fm = sf / sw;
    const double ym = sy / sw;
    double sff = 0.0, sfy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double w = weighted ? s.counts[i] : 1.0;
        sff += w * (f[i] - fm) * (f[i] - fm);
        sfy += w * (f[i] - fm) * (s.means[i] - ym);
    }
    if (!(sff > 1e-14 * (1.0 + fm * fm))) return false;
    theta[1] = sfy / sff;
    theta[0] = ym - theta[1] * fm;
    return std::isfinite(theta[0]) && std::isfinite(theta[1]);
}

ParamVector default_start(const ModelSpec& spec, const LevelSummary& s,
                          const BoundsPolicy& policy, double max_dose) {
    ParamVector theta(spec.param_dim());
    const ParamBounds bounds = param_bounds(spec, max_dose, policy);
    switch (spec.family) {
        case Family::Linear: polynomial_start(theta, s, 1); return theta;
        case Family::Quadratic: polynomial_start(theta, s, 2); return theta;
        case Family::Emax: theta[2] = median_level(s); break;
        case Family::Exp: theta[2] = max_dose; break;
        case Family::SigEmax:
            theta[2] = median_level(s);
            theta[3] = 1.0;
            break;
        case Family::Beta:
            theta[2] = 1.0;
            theta[3] = 1.0;
            break;
    }
    for (std::size_t j = 2; j < spec.param_dim(); ++j)
        theta[j] = clamp_into(theta[j], bounds.lower[j], bounds.upper[j]);
    if (!solve_linear_part(spec, theta, s, false)) {
        // response at the smallest dose and the response range
        const auto [lo, hi] = std::minmax_element(s.means.begin(), s.means.end());
        theta[0] = s.means.front();
        theta[1] = *hi - *lo;
    }
    return theta;
}

}  // namespace detail

}  // namespace maeq
