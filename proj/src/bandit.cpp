#include "aos/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace aos::bandit {

void BanditParams::validate() const {
    UserParams{lambda, p}.validate();
    if (!(activation_cost >= 0.0) || !std::isfinite(activation_cost))
        throw ContractError("activation charge W must be a finite nonnegative number");
}

double ThresholdAnalysis::xi(Age s) const {
    if (s < 0) return 0.0;
    if (s == 0) return xi0;
    if (s <= tau) return xi1;
    return xi1 * std::pow(tail_ratio, static_cast<double>(s - tau));
}

ThresholdAnalysis steady_state(int tau, const BanditParams& params) {
    params.validate();
    if (tau < 1) throw ContractError("threshold must be at least 1, got " + std::to_string(tau));

    const double idle_ratio = (1.0 - params.lambda) / params.lambda;
    const double inv_p = 1.0 / params.p;
    const double t = static_cast<double>(tau);

    ThresholdAnalysis a;
    a.tau = tau;
    a.xi1 = 1.0 / (idle_ratio + t + inv_p - 1.0);
    a.xi0 = idle_ratio * a.xi1;
    a.tail_ratio = 1.0 - params.p;
    a.activation_prob = a.xi1 * inv_p;
    a.avg_cost = t * (t - 1.0) / 2.0 * a.xi1 + a.activation_prob * (inv_p - 1.0) +
                 a.activation_prob * (t + params.activation_cost);
    return a;
}

double avg_cost(int tau, const BanditParams& params) { return steady_state(tau, params).avg_cost; }

int optimal_threshold(const BanditParams& params) {
    params.validate();
    const double inv_p = 1.0 / params.p;
    const double idle_ratio = (1.0 - params.lambda) / params.lambda;
    const double shift = 2.5 - inv_p - 1.0 / params.lambda;
    const double fail_ratio = (1.0 - params.p) / params.p;
    const double disc = shift * shift + 2.0 * (params.activation_cost * inv_p - idle_ratio * fail_ratio) + 2.0 * fail_ratio;
    double x = shift + std::sqrt(std::max(disc, 0.0));

    // Jump points are exact in rational arithmetic; keep rounding noise from
    // flipping them.
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) x = nearest;

    constexpr double cap = static_cast<double>(std::numeric_limits<int>::max() / 2);
    return static_cast<int>(std::clamp(std::floor(x), 1.0, cap));
}

double whittle_index(Age s, double lambda, double p) {
    if (s < 1) throw ContractError("Whittle index is defined for ages s >= 1");
    const BanditParams free{lambda, p, 0.0};
    const int tau = static_cast<int>(s);
    const ThresholdAnalysis lo = steady_state(tau, free);
    const ThresholdAnalysis hi = steady_state(tau + 1, free);
    return p * (hi.avg_cost - lo.avg_cost) / (lo.xi1 - hi.xi1);
}

DpOracleResult dp_oracle(const BanditParams& params, const DpOracleOptions& options) {
    params.validate();
    int size = options.truncation;
    if (size <= 0) {
        const int guess = optimal_threshold(params);
        const double tail = params.p >= 1.0 ? 0.0 : std::ceil(40.0 / params.p);
        size = std::max({10 * guess, guess + static_cast<int>(tail), 20});
    }
    if (size < 2) throw ContractError("truncation must be at least 2");

    const double lam = params.lambda;
    const double p = params.p;
    const double w = params.activation_cost;
    // Lazy chain (1 - kappa) I + kappa P: same gain, no periodicity trouble.
    constexpr double kappa = 0.5;

    const auto n = static_cast<std::size_t>(size) + 1;
    std::vector<double> h(n, 0.0), next(n, 0.0);
    DpOracleResult out;

    auto active_q = [&](std::size_t s, const std::vector<double>& v) {
        const std::size_t up = std::min(s + 1, n - 1);
        return static_cast<double>(s) + w +
               kappa * (p * (lam * v[1] + (1.0 - lam) * v[0]) + (1.0 - p) * v[up]) + (1.0 - kappa) * v[s];
    };
    auto passive_q = [&](std::size_t s, const std::vector<double>& v) {
        const std::size_t up = std::min(s + 1, n - 1);
        return static_cast<double>(s) + kappa * v[up] + (1.0 - kappa) * v[s];
    };

    double gain = 0.0;
    bool converged = false;
    for (int it = 1; it <= options.max_iterations; ++it) {
        next[0] = kappa * (lam * h[1] + (1.0 - lam) * h[0]) + (1.0 - kappa) * h[0];
        for (std::size_t s = 1; s < n; ++s) next[s] = std::min(active_q(s, h), passive_q(s, h));

        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t s = 0; s < n; ++s) {
            const double d = next[s] - h[s];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        const double ref = next[0];
        for (std::size_t s = 0; s < n; ++s) h[s] = next[s] - ref;
        gain = 0.5 * (lo + hi);
        out.iterations = it;
        if (hi - lo <= options.tolerance * std::max(1.0, std::abs(gain))) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw std::runtime_error("bandit DP oracle did not converge; truncation may be too small");

    out.avg_cost = gain;
    out.threshold = size;
    const double margin = 1e-9 * std::max(1.0, w + static_cast<double>(size));
    for (std::size_t s = 1; s < n; ++s) {
        if (active_q(s, h) < passive_q(s, h) - margin) {
            out.threshold = static_cast<int>(s);
            break;
        }
    }
    // The lazy chain scales relative values by 1/kappa.
    for (auto& v : h) v *= kappa;
    out.relative_values = std::move(h);
    return out;
}

IndexabilityReport certify_indexability(double lambda, double p, std::span<const double> charges) {
    if (!std::is_sorted(charges.begin(), charges.end()))
        throw ContractError("activation charge grid must be sorted ascending");
    IndexabilityReport report;
    report.charges.assign(charges.begin(), charges.end());
    for (std::size_t i = 0; i < charges.size(); ++i) {
        report.thresholds.push_back(optimal_threshold({lambda, p, charges[i]}));
        if (i > 0 && report.thresholds[i] < report.thresholds[i - 1]) report.violations.push_back(i);
    }
    report.indexable = report.violations.empty();
    return report;
}

}  // namespace aos::bandit
