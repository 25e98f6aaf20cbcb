#include "aos/core.hpp"

#include <algorithm>
#include <string>

namespace aos {

void UserParams::validate() const {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw ContractError("arrival probability lambda must lie in (0, 1], got " + std::to_string(lambda));
    if (!(p > 0.0 && p <= 1.0))
        throw ContractError("success probability p must lie in (0, 1], got " + std::to_string(p));
}

void NetworkConfig::validate() const {
    if (users.empty()) throw ContractError("network needs at least one user");
    for (const auto& u : users) u.validate();
    if (bandwidth_m < 1 || static_cast<std::size_t>(bandwidth_m) > users.size())
        throw ContractError("bandwidth M must satisfy 1 <= M <= N");
    if (horizon_t < 1) throw ContractError("horizon T must be positive");
}

NetworkState NetworkState::synchronized(std::size_t users) {
    NetworkState s;
    s.aos.assign(users, 0);
    s.aoi.assign(users, 0);
    s.bs_age.assign(users, std::nullopt);
    return s;
}

Age step_aos(Age s, bool arrival, bool scheduled, bool success) {
    if (success && !scheduled) throw ContractError("delivery success requires the user to be scheduled");
    if (s < 0) throw ContractError("AoS must be nonnegative");
    if (s == 0) return arrival ? 1 : 0;
    if (success) return arrival ? 1 : 0;
    return s + 1;
}

AoIStep step_aoi(Age h, std::optional<Age> bs_age, bool arrival, bool scheduled, bool success) {
    if (success && !scheduled) throw ContractError("delivery success requires the user to be scheduled");
    if (h < 0) throw ContractError("AoI must be nonnegative");

    std::optional<Age> next_bs;
    if (arrival)
        next_bs = 1;
    else if (bs_age)
        next_bs = *bs_age + 1;

    Age next_h = 0;
    if (success && bs_age)
        next_h = *bs_age + 1;
    else if (next_bs || h > 0)
        next_h = h + 1;
    return {next_h, next_bs};
}

void run_slot(NetworkState& state, std::span<const int> scheduled, const SlotDraws& draws,
              int bandwidth_m, SlotOutcome* outcome) {
    const std::size_t n = state.size();
    if (draws.arrivals.size() != n || draws.channel_ok.size() != n)
        throw ContractError("slot draws do not match the number of users");
    if (scheduled.size() > static_cast<std::size_t>(bandwidth_m))
        throw ContractError("more users scheduled than the bandwidth allows");
    for (std::size_t i = 0; i < scheduled.size(); ++i) {
        const int u = scheduled[i];
        if (u < 0 || static_cast<std::size_t>(u) >= n)
            throw ContractError("scheduled user index out of range: " + std::to_string(u));
        for (std::size_t j = 0; j < i; ++j)
            if (scheduled[j] == u) throw ContractError("user scheduled twice in one slot");
    }

    if (outcome) {
        outcome->arrivals = draws.arrivals;
        outcome->scheduled.assign(scheduled.begin(), scheduled.end());
        outcome->delivered.assign(n, 0);
    }
    for (std::size_t u = 0; u < n; ++u) {
        const bool is_scheduled = std::find(scheduled.begin(), scheduled.end(), static_cast<int>(u)) != scheduled.end();
        const bool arrival = draws.arrivals[u] != 0;
        const bool success = is_scheduled && draws.channel_ok[u] != 0;
        state.aos[u] = step_aos(state.aos[u], arrival, is_scheduled, success);
        const AoIStep next = step_aoi(state.aoi[u], state.bs_age[u], arrival, is_scheduled, success);
        state.aoi[u] = next.h;
        state.bs_age[u] = next.bs_age;
        if (outcome && success) outcome->delivered[u] = 1;
    }
}

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

std::uint64_t stream_key(std::uint64_t master_seed, std::uint64_t replication, std::uint64_t user,
                         RandomStreams::Purpose purpose) {
    std::uint64_t k = mix64(master_seed);
    k = mix64(k ^ mix64(replication + 0x5851f42d4c957f2dULL));
    k = mix64(k ^ mix64(user + 0x14057b7ef767814fULL));
    return mix64(k ^ static_cast<std::uint64_t>(purpose));
}

}  // namespace

RandomStreams::RandomStreams(std::uint64_t master_seed, std::uint64_t replication, std::size_t users) {
    arrival_keys_.reserve(users);
    channel_keys_.reserve(users);
    for (std::size_t u = 0; u < users; ++u) {
        arrival_keys_.push_back(stream_key(master_seed, replication, u, Purpose::arrival));
        channel_keys_.push_back(stream_key(master_seed, replication, u, Purpose::channel));
    }
}

double RandomStreams::uniform(std::size_t user, Purpose purpose, std::uint64_t t) const {
    const std::uint64_t key = purpose == Purpose::arrival ? arrival_keys_.at(user) : channel_keys_.at(user);
    const std::uint64_t bits = mix64(key + t * 0x9e3779b97f4a7c15ULL);
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

void RandomStreams::draw(std::uint64_t t, std::span<const UserParams> users, SlotDraws& out) const {
    const std::size_t n = users.size();
    out.arrivals.resize(n);
    out.channel_ok.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        out.arrivals[u] = arrival(u, t, users[u].lambda);
        out.channel_ok[u] = channel(u, t, users[u].p);
    }
}

}  // namespace aos
