#include "aos/policy.hpp"

#include <algorithm>

#include "aos/bandit.hpp"
#include "aos/mdp.hpp"

namespace aos {

IndexTable::IndexTable(std::span<const UserParams> users, Age max_age)
    : params_(users.begin(), users.end()), max_age_(max_age) {
    if (max_age < 1) throw ContractError("index table needs max age >= 1");
    values_.resize(params_.size());
    for (std::size_t n = 0; n < params_.size(); ++n) {
        params_[n].validate();
        auto& col = values_[n];
        col.reserve(static_cast<std::size_t>(max_age));
        for (Age s = 1; s <= max_age; ++s) {
            col.push_back(bandit::whittle_index(s, params_[n].lambda, params_[n].p));
            if (col.size() > 1 && !(col.back() > col[col.size() - 2]))
                throw std::logic_error("Whittle index not strictly increasing in age");
        }
    }
}

double IndexTable::at(std::size_t user, Age s) const {
    if (user >= params_.size()) throw ContractError("index table has no such user");
    if (s < 1) throw ContractError("index is defined for ages >= 1");
    if (s <= max_age_) return values_[user][static_cast<std::size_t>(s - 1)];
    return bandit::whittle_index(s, params_[user].lambda, params_[user].p);
}

namespace {

// Writes into `out` the `count` eligible users with the largest key, ties to
// the lowest index. Reuses `out`'s storage so per-slot calls do not allocate.
template <class Eligible, class Key>
void pick_top(std::size_t n, Eligible eligible, Key key, int count, Schedule& out) {
    out.clear();
    if (count <= 0) return;
    if (count == 1) {
        int best = -1;
        double best_key = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
            if (!eligible(u)) continue;
            const double k = key(u);
            if (best < 0 || k > best_key) {
                best = static_cast<int>(u);
                best_key = k;
            }
        }
        if (best >= 0) out.push_back(best);
        return;
    }
    for (std::size_t u = 0; u < n; ++u)
        if (eligible(u)) out.push_back(static_cast<int>(u));
    const auto take = std::min<std::size_t>(out.size(), static_cast<std::size_t>(count));
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(take), out.end(), [&](int a, int b) {
        const double ka = key(static_cast<std::size_t>(a));
        const double kb = key(static_cast<std::size_t>(b));
        if (ka != kb) return ka > kb;
        return a < b;
    });
    out.resize(take);
}

void greedy_into(std::span<const Age> aos, int bandwidth_m, Schedule& out) {
    pick_top(
        aos.size(), [&](std::size_t u) { return aos[u] > 0; },
        [&](std::size_t u) { return static_cast<double>(aos[u]); }, bandwidth_m, out);
}

void whittle_into(std::span<const Age> aos, const IndexTable& table, int bandwidth_m, Schedule& out) {
    if (table.users() != aos.size()) throw ContractError("index table does not cover every user");
    pick_top(
        aos.size(), [&](std::size_t u) { return aos[u] > 0; }, [&](std::size_t u) { return table.at(u, aos[u]); },
        bandwidth_m, out);
}

void aoi_into(std::span<const Age> aoi, std::span<const std::optional<Age>> bs_age, std::span<const UserParams> users,
              int bandwidth_m, Schedule& out) {
    pick_top(
        aoi.size(), [&](std::size_t u) { return bs_age[u].has_value() && *bs_age[u] < aoi[u]; },
        [&](std::size_t u) { return aoi_index(aoi[u], users[u].p); }, bandwidth_m, out);
}

}  // namespace

Schedule top_users(std::span<const double> keys, std::span<const char> eligible, int count) {
    Schedule out;
    pick_top(
        keys.size(), [&](std::size_t u) { return eligible[u] != 0; }, [&](std::size_t u) { return keys[u]; }, count,
        out);
    return out;
}

Schedule greedy_aos(std::span<const Age> aos, int bandwidth_m) {
    Schedule out;
    greedy_into(aos, bandwidth_m, out);
    return out;
}

Schedule whittle_aos(std::span<const Age> aos, const IndexTable& table, int bandwidth_m) {
    Schedule out;
    whittle_into(aos, table, bandwidth_m, out);
    return out;
}

double aoi_index(Age h, double p) {
    const double x = static_cast<double>(h);
    return p * x / 2.0 * (x + (2.0 - p) / p);
}

Schedule aoi_index_baseline(std::span<const Age> aoi, std::span<const std::optional<Age>> bs_age,
                            std::span<const UserParams> users, int bandwidth_m) {
    Schedule out;
    aoi_into(aoi, bs_age, users, bandwidth_m, out);
    return out;
}

void GreedyPolicy::decide(const NetworkState& state, Schedule& out) const { greedy_into(state.aos, bandwidth_m_, out); }

WhittlePolicy::WhittlePolicy(std::span<const UserParams> users, int bandwidth_m, Age table_max_age)
    : table_(users, table_max_age), bandwidth_m_(bandwidth_m) {}

void WhittlePolicy::decide(const NetworkState& state, Schedule& out) const {
    whittle_into(state.aos, table_, bandwidth_m_, out);
}

AoiBaselinePolicy::AoiBaselinePolicy(std::span<const UserParams> users, int bandwidth_m)
    : users_(users.begin(), users.end()), bandwidth_m_(bandwidth_m) {}

void AoiBaselinePolicy::decide(const NetworkState& state, Schedule& out) const {
    aoi_into(state.aoi, state.bs_age, users_, bandwidth_m_, out);
}

MdpPolicy::MdpPolicy(std::shared_ptr<const mdp::StationaryPolicy> policy) : policy_(std::move(policy)) {
    if (!policy_) throw ContractError("MDP policy requires a solved stationary policy");
}

void MdpPolicy::decide(const NetworkState& state, Schedule& out) const {
    out.clear();
    const int a = policy_->action_for(state.aos);
    if (a != mdp::kIdle) out.push_back(a);
}

bool is_known_policy(std::string_view name) {
    return name == "greedy" || name == "whittle" || name == "aoi" || name == "mdp";
}

std::unique_ptr<Policy> make_policy(std::string_view name, const NetworkConfig& network, const PolicyOptions& options) {
    if (name == "greedy") return std::make_unique<GreedyPolicy>(network.bandwidth_m);
    if (name == "whittle") return std::make_unique<WhittlePolicy>(network.users, network.bandwidth_m);
    if (name == "aoi") return std::make_unique<AoiBaselinePolicy>(network.users, network.bandwidth_m);
    if (name == "mdp") {
        if (network.bandwidth_m != 1) throw ContractError("the MDP policy supports M = 1 only");
        const mdp::TruncatedModel model(network.users, options.mdp_truncation);
        auto solved = mdp::structural_policy_iteration(model, options.mdp_discount);
        return std::make_unique<MdpPolicy>(std::make_shared<const mdp::StationaryPolicy>(std::move(solved.policy)));
    }
    throw ContractError("unknown policy name: " + std::string(name));
}

}  // namespace aos
