#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aos/core.hpp"

namespace aos {

namespace mdp {
struct StationaryPolicy;
}

/// Memoized Whittle indices I_n(s) per user. Ages beyond the cached range are
/// evaluated on the fly, so lookups never mutate and concurrent readers are safe.
class IndexTable {
public:
    IndexTable() = default;
    IndexTable(std::span<const UserParams> users, Age max_age);

    double at(std::size_t user, Age s) const;
    std::size_t users() const { return params_.size(); }
    Age cached_max_age() const { return max_age_; }

private:
    std::vector<UserParams> params_;
    std::vector<std::vector<double>> values_;  // values_[n][s - 1]
    Age max_age_ = 0;
};

/// Picks up to `count` users with the largest key among those with eligible[n]
/// set; ties go to the lowest index. Keys only need to be comparable.
Schedule top_users(std::span<const double> keys, std::span<const char> eligible, int count);

/// The M most desynchronized users among those with s_n > 0.
Schedule greedy_aos(std::span<const Age> aos, int bandwidth_m = 1);

/// The M users with the largest Whittle index among those with s_n > 0.
Schedule whittle_aos(std::span<const Age> aos, const IndexTable& table, int bandwidth_m = 1);

/// AoI index applied to AoI ages, restricted to users whose BS copy is fresher
/// than theirs.
double aoi_index(Age h, double p);
Schedule aoi_index_baseline(std::span<const Age> aoi, std::span<const std::optional<Age>> bs_age,
                            std::span<const UserParams> users, int bandwidth_m = 1);

/// Uniform scheduler interface. Implementations are immutable after
/// construction; `decide` may be called concurrently.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string_view name() const = 0;
    virtual void decide(const NetworkState& state, Schedule& out) const = 0;
};

class GreedyPolicy final : public Policy {
public:
    explicit GreedyPolicy(int bandwidth_m) : bandwidth_m_(bandwidth_m) {}
    std::string_view name() const override { return "greedy"; }
    void decide(const NetworkState& state, Schedule& out) const override;

private:
    int bandwidth_m_;
};

class WhittlePolicy final : public Policy {
public:
    WhittlePolicy(std::span<const UserParams> users, int bandwidth_m, Age table_max_age = 4096);
    std::string_view name() const override { return "whittle"; }
    void decide(const NetworkState& state, Schedule& out) const override;
    const IndexTable& table() const { return table_; }

private:
    IndexTable table_;
    int bandwidth_m_;
};

class AoiBaselinePolicy final : public Policy {
public:
    AoiBaselinePolicy(std::span<const UserParams> users, int bandwidth_m);
    std::string_view name() const override { return "aoi"; }
    void decide(const NetworkState& state, Schedule& out) const override;

private:
    std::vector<UserParams> users_;
    int bandwidth_m_;
};

/// Schedules by looking up a solved truncated-MDP policy at min(s, m).
class MdpPolicy final : public Policy {
public:
    explicit MdpPolicy(std::shared_ptr<const mdp::StationaryPolicy> policy);
    std::string_view name() const override { return "mdp"; }
    void decide(const NetworkState& state, Schedule& out) const override;

private:
    std::shared_ptr<const mdp::StationaryPolicy> policy_;
};

/// Options consumed by `make_policy` for policies that need a solve.
struct PolicyOptions {
    int mdp_truncation = 20;
    double mdp_discount = 0.99;
};

/// Resolves "greedy", "whittle", "aoi" or "mdp". Throws ContractError on an
/// unknown name.
std::unique_ptr<Policy> make_policy(std::string_view name, const NetworkConfig& network,
                                    const PolicyOptions& options = {});

bool is_known_policy(std::string_view name);

}  // namespace aos
