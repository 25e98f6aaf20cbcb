#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aos/core.hpp"

/// Truncated multi-user MDP: every age is capped at m, the cap row is
/// absorbing when the user is not scheduled. Actions are user indices, with
/// kIdle for an idle slot.
namespace aos::mdp {

inline constexpr int kIdle = -1;

struct Transition {
    std::size_t to;
    double prob;
};

class TruncatedModel {
public:
    TruncatedModel(std::vector<UserParams> users, int cap);

    std::size_t users() const { return users_.size(); }
    int cap() const { return cap_; }
    std::size_t state_count() const { return state_count_; }
    const std::vector<UserParams>& params() const { return users_; }

    std::size_t index_of(std::span<const int> ages) const;
    void decode(std::size_t index, std::span<int> ages) const;
    std::vector<int> state(std::size_t index) const;
    std::size_t stride(std::size_t user) const { return strides_[user]; }

    /// One-step cost: mean capped age.
    double cost(std::span<const int> ages) const;

    /// Full next-state distribution (product of per-user rows).
    std::vector<Transition> kernel(std::span<const int> ages, int action) const;

    /// Sum over next states of prob * values[next], without materializing the
    /// distribution.
    double expected(std::span<const double> values, std::span<const int> ages, int action) const;

    /// cost + discount * expected(values)
    double q_value(std::span<const double> values, std::span<const int> ages, int action, double discount) const;

private:
    std::vector<UserParams> users_;
    int cap_;
    std::size_t state_count_;
    std::vector<std::size_t> strides_;
};

struct ValueTable {
    std::vector<double> values;  ///< indexed by TruncatedModel::index_of
    double discount = 0.0;
    int cap = 0;
    std::size_t users = 0;

    double at(const TruncatedModel& model, std::span<const int> ages) const {
        return values[model.index_of(ages)];
    }
};

struct StationaryPolicy {
    std::vector<int> actions;  ///< kIdle or user index, per truncated state
    int cap = 0;
    std::size_t users = 0;

    /// Action for untruncated ages (each age clamped to the cap).
    int action_for(std::span<const Age> ages) const;
};

/// Lowest-cost action under `values`; ties prefer idle, then the lowest user index.
int greedy_action(const TruncatedModel& model, std::span<const double> values, std::span<const int> ages,
                  double discount);

StationaryPolicy greedy_policy(const TruncatedModel& model, const ValueTable& values);

struct SolveOptions {
    double tolerance = 1e-11;
    int max_iterations = 200'000;
};

/// Plain discounted value iteration until the sup-norm residual is below tolerance.
ValueTable discounted_value_iteration(const TruncatedModel& model, double discount, const SolveOptions& options = {});

struct PolicyIterationResult {
    StationaryPolicy policy;
    ValueTable values;  ///< relative values, V(all zeros) = 0
    int iterations = 0;
    std::size_t propagated_states = 0;  ///< state updates filled by the switching structure
};

/// Relative policy iteration that propagates each chosen action along the
/// scheduled user's age axis and skips re-optimizing the implied states.
PolicyIterationResult structural_policy_iteration(const TruncatedModel& model, double discount,
                                                  const SolveOptions& options = {});

/// Howard policy iteration with exact (sparse LU) policy evaluation and no
/// structure exploitation. Returns relative values.
PolicyIterationResult plain_policy_iteration(const TruncatedModel& model, double discount,
                                             const SolveOptions& options = {});

struct Violation {
    enum class Kind { monotonicity, submodularity, persistence };
    Kind kind;
    std::vector<int> state;
    std::string detail;
};

struct StructureReport {
    std::size_t monotonicity_checks = 0;
    std::size_t submodularity_checks = 0;
    std::size_t persistence_checks = 0;
    std::vector<Violation> violations;
    /// Diagnostic only: pairs where the opposite (supermodular) inequality fails.
    std::size_t supermodularity_failures = 0;

    std::size_t count(Violation::Kind kind) const;
};

/// Exhaustive scan for value monotonicity, submodularity, and persistence of
/// the greedy action along the scheduled user's axis.
StructureReport verify_structure(const TruncatedModel& model, const ValueTable& values, double tolerance = 1e-9);

const char* to_string(Violation::Kind kind);

/// CSV with one row per truncated state: a_1..a_N,action (idle written as -1).
void write_policy_csv(std::ostream& out, const TruncatedModel& model, const StationaryPolicy& policy);
/// Dense binary dump: "AOSPOL1\0", u32 users, u32 cap, then one i32 per state.
void write_policy_binary(std::ostream& out, const StationaryPolicy& policy);

}  // namespace aos::mdp
