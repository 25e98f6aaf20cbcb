#pragma once

#include <span>
#include <vector>

#include "aos/core.hpp"

/// Network-wide AoS lower bound from relaxing the per-slot bandwidth limit to
/// a time-average one and solving the resulting convex program over the
/// per-user delivery rates gamma_n.
namespace aos::bound {

struct BoundSolution {
    std::vector<double> gamma;
    double mu = 0.0;
    std::vector<double> nu;
    double aos_lb = 0.0;
    bool binding = false;  ///< sum gamma_n / p_n = 1 is active

    /// Objective with the clamp written as max{root, lambda_n} instead of
    /// min; reported only for comparison.
    std::vector<double> gamma_max_variant;
    double aos_lb_max_variant = 0.0;
};

/// Unclamped KKT root for user n at multiplier mu, or +inf when the
/// discriminant is nonpositive.
double kkt_root(double mu, const UserParams& user, std::size_t users);

/// gamma_n(mu) = min{root_n(mu), lambda_n}.
std::vector<double> gamma_of_mu(double mu, std::span<const UserParams> users);

/// (1/N) sum gamma_n [ (w_n^2 + w_n) / 2 ], w_n = 1/gamma_n - (1 - lambda_n)/lambda_n.
double objective(std::span<const UserParams> users, std::span<const double> gamma);

/// sum gamma_n / p_n
double bandwidth_usage(std::span<const UserParams> users, std::span<const double> gamma);

/// Gradient of the Lagrangian with respect to gamma_n.
double lagrangian_gradient(const UserParams& user, std::size_t users, double gamma, double mu, double nu);

BoundSolution solve_bound(std::span<const UserParams> users, double tolerance = 1e-12);

}  // namespace aos::bound
