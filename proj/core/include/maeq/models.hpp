#pragma once

// Candidate dose/time-response families and their evaluation.
//
// Every family is linear in its first two parameters (intercept and effect);
// the remaining ones, where present, are shape parameters with box bounds.

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace maeq {

struct GroupData;

enum class Family { Linear, Quadratic, Emax, Exp, SigEmax, Beta };

inline constexpr std::array<Family, 6> kAllFamilies = {
    Family::Linear, Family::Quadratic, Family::Emax,
    Family::Exp,    Family::SigEmax,   Family::Beta};

inline constexpr std::size_t kMaxParams = 4;

constexpr std::size_t param_dim(Family f) noexcept {
    switch (f) {
        case Family::Linear: return 2;
        case Family::Quadratic:
        case Family::Emax:
        case Family::Exp: return 3;
        case Family::SigEmax:
        case Family::Beta: return 4;
    }
    return 0;
}

std::string_view family_name(Family f) noexcept;
/// Accepts the canonical names ("linear", "quadratic", "emax", "exp",
/// "sigemax", "beta"), case-insensitive. Throws ConfigError otherwise.
Family parse_family(std::string_view name);

/// One candidate family plus its fixed constants.
struct ModelSpec {
    Family family = Family::Linear;
    double scale_s = 0.0;  ///< beta model only; must exceed the largest dose

    std::size_t param_dim() const noexcept { return maeq::param_dim(family); }

    static ModelSpec of(Family f) { return ModelSpec{f, 0.0}; }
    static ModelSpec beta(double scale_s) { return ModelSpec{Family::Beta, scale_s}; }
    /// Beta scale following the 1.2 x max dose convention.
    static ModelSpec beta_for_max_dose(double max_dose) { return beta(1.2 * max_dose); }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Builds specs for `families`, attaching `beta_scale` to the beta model.
std::vector<ModelSpec> make_candidates(std::span<const Family> families, double beta_scale);

/// Parameter vector (b0, b1, b2, b3) with fixed capacity.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t dim) : dim_(dim) {}
    ParamVector(std::initializer_list<double> values);

    std::size_t size() const noexcept { return dim_; }
    double& operator[](std::size_t i) noexcept { return v_[i]; }
    double operator[](std::size_t i) const noexcept { return v_[i]; }
    std::span<double> values() noexcept { return {v_.data(), dim_}; }
    std::span<const double> values() const noexcept { return {v_.data(), dim_}; }

    friend bool operator==(const ParamVector& a, const ParamVector& b) noexcept {
        if (a.dim_ != b.dim_) return false;
        for (std::size_t i = 0; i < a.dim_; ++i)
            if (a.v_[i] != b.v_[i]) return false;
        return true;
    }

private:
    std::array<double, kMaxParams> v_{};
    std::size_t dim_ = 0;
};

using Gradient = ParamVector;

/// Equally spaced evaluation grid on [lower, upper], endpoints included.
class DoseGrid {
public:
    DoseGrid(double lower, double upper, std::size_t n_points);

    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    std::size_t size() const noexcept { return n_; }
    double step() const noexcept { return (upper_ - lower_) / static_cast<double>(n_ - 1); }
    double at(std::size_t i) const noexcept {
        return i + 1 == n_ ? upper_ : lower_ + step() * static_cast<double>(i);
    }
    std::vector<double> points() const;

private:
    double lower_;
    double upper_;
    std::size_t n_;
};

/// m(x, theta). Throws DomainError for x outside the family's domain or
/// parameters violating the family's constraints.
double eval_model(const ModelSpec& spec, const ParamVector& theta, double x);

/// dm/dtheta at x; same domain rules as eval_model.
Gradient eval_gradient(const ModelSpec& spec, const ParamVector& theta, double x);

/// Value and gradient in one pass.
double eval_model_and_gradient(const ModelSpec& spec, const ParamVector& theta, double x,
                               Gradient& grad);

/// Throws DomainError if theta violates the family's parameter constraints
/// or has the wrong dimension.
void check_params(const ModelSpec& spec, const ParamVector& theta);

/// Box bounds for the shape parameters, expressed as multiples of the
/// largest design dose (dose-like parameters) or as absolute values (shapes).
struct BoundsPolicy {
    double ed50_lower = 1e-3;  ///< emax / sigEmax ED50, x max dose
    double ed50_upper = 1.5;
    double exp_delta_lower = 0.1;  ///< exp model rate parameter, x max dose
    double exp_delta_upper = 2.0;
    double hill_lower = 0.5;  ///< sigEmax Hill coefficient (absolute)
    double hill_upper = 10.0;
    double shape_lower = 0.05;  ///< beta shapes (absolute)
    double shape_upper = 4.0;
};

struct ParamBounds {
    ParamVector lower;
    ParamVector upper;
};

ParamBounds param_bounds(const ModelSpec& spec, double max_dose, const BoundsPolicy& policy = {});

/// Feasible starting point from data-scale heuristics. Intercept and effect
/// come from least squares on the dose-level means given the shape heuristic.
ParamVector default_start(const ModelSpec& spec, const GroupData& data,
                          const BoundsPolicy& policy = {});

}  // namespace maeq
