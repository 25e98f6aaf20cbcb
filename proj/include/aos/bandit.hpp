#pragma once

#include <span>
#include <vector>

#include "aos/core.hpp"

/// Closed-form analysis of the single-user decoupled bandit: the user is
/// charged `activation_cost` (the multiplier W) every slot it is scheduled and
/// its AoS every slot.
namespace aos::bandit {

struct BanditParams {
    double lambda = 1.0;
    double p = 1.0;
    double activation_cost = 0.0;

    void validate() const;
};

/// Stationary behaviour of the threshold policy "schedule iff s >= tau".
struct ThresholdAnalysis {
    int tau = 1;
    double xi0 = 0.0;         ///< stationary mass of s = 0
    double xi1 = 0.0;         ///< mass of each state 1..tau
    double tail_ratio = 0.0;  ///< geometric decay (1 - p) above tau
    double avg_cost = 0.0;
    double activation_prob = 0.0;

    /// Stationary probability of state s.
    double xi(Age s) const;
};

ThresholdAnalysis steady_state(int tau, const BanditParams& params);

/// Long-run average of s(t) + W u(t) under threshold tau.
double avg_cost(int tau, const BanditParams& params);

/// Optimal activation threshold for the charge in `params`, clamped to >= 1.
/// At an exact jump point the closed form returns the larger of the two tied
/// thresholds.
int optimal_threshold(const BanditParams& params);

/// Whittle index of age s >= 1.
double whittle_index(Age s, double lambda, double p);

struct DpOracleResult {
    int threshold = 1;
    double avg_cost = 0.0;
    std::vector<double> relative_values;  ///< h(s), s = 0..truncation, h(0) = 0
    int iterations = 0;
};

struct DpOracleOptions {
    int truncation = 0;  ///< 0 picks a size from the closed-form threshold and p
    double tolerance = 1e-11;
    int max_iterations = 2'000'000;
};

/// Relative value iteration on the truncated single-user chain. Independent
/// of the closed forms above; used only to cross-check them.
DpOracleResult dp_oracle(const BanditParams& params, const DpOracleOptions& options = {});

struct IndexabilityReport {
    bool indexable = true;
    std::vector<double> charges;
    std::vector<int> thresholds;
    std::vector<std::size_t> violations;  ///< grid positions where the threshold dropped
};

/// Checks that the optimal threshold is nondecreasing along a sorted grid of charges.
IndexabilityReport certify_indexability(double lambda, double p, std::span<const double> charges);

}  // namespace aos::bandit
