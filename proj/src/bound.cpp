#include "aos/bound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aos::bound {

namespace {

double idle_ratio(const UserParams& u) { return (1.0 - u.lambda) / u.lambda; }

void validate(std::span<const UserParams> users) {
    if (users.empty()) throw ContractError("bound needs at least one user");
    for (const auto& u : users) u.validate();
}

}  // namespace

double kkt_root(double mu, const UserParams& user, std::size_t users) {
    const double d = idle_ratio(user);
    const double disc = d * d - d + 2.0 * mu * static_cast<double>(users) / user.p;
    if (disc <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / std::sqrt(disc);
}

std::vector<double> gamma_of_mu(double mu, std::span<const UserParams> users) {
    if (!(mu >= 0.0)) throw ContractError("multiplier mu must be nonnegative");
    validate(users);
    std::vector<double> g(users.size());
    for (std::size_t n = 0; n < users.size(); ++n)
        g[n] = std::min(kkt_root(mu, users[n], users.size()), users[n].lambda);
    return g;
}

double objective(std::span<const UserParams> users, std::span<const double> gamma) {
    double total = 0.0;
    for (std::size_t n = 0; n < users.size(); ++n) {
        const double w = 1.0 / gamma[n] - idle_ratio(users[n]);
        total += gamma[n] * (0.5 * w * w + 0.5 * w);
    }
    return total / static_cast<double>(users.size());
}

double bandwidth_usage(std::span<const UserParams> users, std::span<const double> gamma) {
    double total = 0.0;
    for (std::size_t n = 0; n < users.size(); ++n) total += gamma[n] / users[n].p;
    return total;
}

double lagrangian_gradient(const UserParams& user, std::size_t users, double gamma, double mu, double nu) {
    const double d = idle_ratio(user);
    const double scale = 1.0 / (2.0 * static_cast<double>(users));
    return scale * (d * d - d) - scale / (gamma * gamma) + mu / user.p + nu;
}

BoundSolution solve_bound(std::span<const UserParams> users, double tolerance) {
    validate(users);
    const std::size_t n_users = users.size();
    BoundSolution sol;

    auto excess = [&](double mu) { return bandwidth_usage(users, gamma_of_mu(mu, users)) - 1.0; };

    if (excess(0.0) <= 0.0) {
        sol.mu = 0.0;
        sol.binding = false;
    } else {
        double lo = 0.0;
        double hi = 1.0;
        int doublings = 0;
        while (excess(hi) > 0.0) {
            lo = hi;
            hi *= 2.0;
            if (++doublings > 200) throw std::runtime_error("could not bracket the bandwidth multiplier");
        }
        for (int it = 0; it < 400; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double e = excess(mid);
            if (std::abs(e) <= tolerance) {
                lo = hi = mid;
                break;
            }
            (e > 0.0 ? lo : hi) = mid;
            if (hi - lo <= std::numeric_limits<double>::epsilon() * hi) break;
        }
        sol.mu = 0.5 * (lo + hi);
        sol.binding = true;
    }

    sol.gamma = gamma_of_mu(sol.mu, users);
    sol.nu.assign(n_users, 0.0);
    sol.gamma_max_variant.resize(n_users);
    for (std::size_t n = 0; n < n_users; ++n) {
        // Clamped users carry the slack of gamma_n <= lambda_n.
        if (sol.gamma[n] >= users[n].lambda)
            sol.nu[n] = std::max(0.0, -lagrangian_gradient(users[n], n_users, sol.gamma[n], sol.mu, 0.0));
        const double root = kkt_root(sol.mu, users[n], n_users);
        sol.gamma_max_variant[n] = std::isfinite(root) ? std::max(root, users[n].lambda) : users[n].lambda;
    }
    sol.aos_lb = objective(users, sol.gamma);
    sol.aos_lb_max_variant = objective(users, sol.gamma_max_variant);
    return sol;
}

}  // namespace aos::bound
