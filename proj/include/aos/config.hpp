#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aos/core.hpp"
#include "aos/sim.hpp"

namespace aos {

/// How per-user (lambda, p) are produced for a configuration point.
///
///   explicit      users[] as given; entries may carry lambda_weight instead of
///                 lambda, scaled by lambda_total
///   rate_ramp     lambda_n = 2n / (N(N+1)) * lambda_total, p_n = n / N
///   lambda_ramp   lambda_n = lambda_scale * n / N, p_n = p
///   p_ramp        lambda_n = lambda, p_n = n / N
struct NetworkGenerator {
    std::string type = "explicit";
    int users = 0;
    double lambda_total = 0.0;
    double lambda = 0.0;
    double lambda_scale = 0.0;
    double p = 0.0;
};

struct UserSpec {
    std::optional<double> lambda;
    std::optional<double> lambda_weight;
    double p = 1.0;
};

struct SweepSpec {
    std::string param;  ///< "lambda_total" or "n"
    std::vector<double> values;
};

struct ExperimentConfig {
    std::vector<UserSpec> users;
    NetworkGenerator generator;
    std::optional<double> lambda_total;
    int bandwidth_m = 1;
    std::int64_t horizon_t = 1'000'000;
    int replications = 1;
    std::uint64_t seed = 1;
    std::vector<std::string> policies{"whittle"};
    std::optional<SweepSpec> sweep;
    int mdp_truncation = 20;
    double mdp_discount = 0.99;
    std::string output;
    std::string histogram;  ///< occupancy histogram CSV path; empty disables recording

    void validate() const;
    /// Network for the base configuration, or for one sweep point.
    NetworkConfig network(const std::optional<std::pair<std::string, double>>& override_point = std::nullopt) const;
};

/// Parses the JSON config format. Throws ContractError on invalid fields.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

struct SweepRow {
    std::string param;
    double value = 0.0;
    ExperimentMetrics metrics;
    double aos_lb = 0.0;
};

/// Runs every policy at every sweep point (or at the base point if no sweep)
/// with common random numbers across policies.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const RunOptions& options = {});

/// Header plus one row per (point, policy, replication) and one aggregate row
/// per (point, policy) with replication = "all".
void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace aos
