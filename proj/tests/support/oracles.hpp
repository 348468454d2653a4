#pragma once

// Reference computations written independently of the library, used as
// test oracles. Everything here is deliberately naive.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "maeq/data.hpp"
#include "maeq/models.hpp"

namespace oracle {

// c0 + c1 x + ... + ck x^k, highest coefficient first in the loop.
inline double horner(const std::vector<double>& c, double x) {
    double acc = c.back();
    for (std::size_t i = c.size() - 1; i-- > 0;) acc = c[i] + x * acc;
    return acc;
}

// Closed forms of the six families, typed straight from their definitions.
inline double model(maeq::Family f, const std::vector<double>& t, double x, double s = 0.0) {
    using maeq::Family;
    switch (f) {
        case Family::Linear: return t[0] + t[1] * x;
        case Family::Quadratic: return t[0] + t[1] * x + t[2] * x * x;
        case Family::Emax: return t[0] + t[1] * x / (t[2] + x);
        case Family::Exp: return t[0] + t[1] * (std::exp(x / t[2]) - 1.0);
        case Family::SigEmax:
            return t[0] + t[1] * std::pow(x, t[3]) / (std::pow(t[2], t[3]) + std::pow(x, t[3]));
        case Family::Beta: {
            const double a = t[2], b = t[3];
            const double B = std::pow(a + b, a + b) / (std::pow(a, a) + std::pow(b, b));
            return t[0] + t[1] * B * std::pow(x / s, a) * std::pow(1.0 - x / s, b);
        }
    }
    return NAN;
}

// Central difference in coordinate j with step 1e-6 (1 + |theta_j|).
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> t, std::size_t j) {
    const double h = 1e-6 * (1.0 + std::abs(t[j]));
    const double t0 = t[j];
    t[j] = t0 + h;
    const double up = f(t);
    t[j] = t0 - h;
    const double down = f(t);
    return (up - down) / (2.0 * h);
}

// Polynomial least squares by the normal equations X'X b = X'y.
inline std::vector<double> normal_equations(const std::vector<double>& x, const std::vector<double>& y,
                                            int degree) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(x.size()), degree + 1);
    Eigen::VectorXd Y(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (int k = 0; k <= degree; ++k) X(static_cast<Eigen::Index>(i), k) = std::pow(x[i], k);
        Y(static_cast<Eigen::Index>(i)) = y[i];
    }
    const Eigen::VectorXd b = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
    return {b.data(), b.data() + b.size()};
}

// Maximum of |f - g| on a uniform grid of n points.
inline double brute_max_gap(const std::function<double(double)>& f, const std::function<double(double)>& g,
                            double lo, double hi, std::size_t n) {
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        best = std::max(best, std::abs(f(x) - g(x)));
    }
    return best;
}

// Gaussian data around `mean` at the listed doses, `per_level` each.
inline maeq::GroupData noisy_group(const std::function<double(double)>& mean, const std::vector<double>& doses,
                                   std::size_t per_level, double sd, std::uint64_t seed,
                                   const std::string& label = "g") {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    maeq::GroupData g;
    g.group_label = label;
    for (double d : doses)
        for (std::size_t r = 0; r < per_level; ++r) {
            g.doses.push_back(d);
            g.responses.push_back(mean(d) + sd * z(eng));
        }
    return g;
}

inline std::vector<double> to_vec(const maeq::ParamVector& p) { return {p.values().begin(), p.values().end()}; }

}  // namespace oracle
