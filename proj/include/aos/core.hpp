#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aos {

using Age = std::int64_t;

/// Thrown when a caller breaks a precondition (bad probability, impossible
/// event combination, out-of-range user index, ...).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Per-user source and channel statistics.
struct UserParams {
    double lambda = 1.0;  ///< per-slot update arrival probability, in (0, 1]
    double p = 1.0;       ///< per-slot delivery success probability, in (0, 1]

    void validate() const;
};

struct NetworkConfig {
    std::vector<UserParams> users;
    int bandwidth_m = 1;
    std::int64_t horizon_t = 1;
    std::uint64_t master_seed = 0;

    std::size_t size() const { return users.size(); }
    void validate() const;
};

/// Users scheduled in one slot. Empty means the BS idles.
using Schedule = std::vector<int>;

/// Full observable network state at the beginning of a slot.
///
/// `aos` is the age of synchronization per user. `aoi` is the age of
/// information per user and `bs_age` the age of the newest packet held at the
/// BS (nullopt until the first update of that source arrives).
struct NetworkState {
    std::vector<Age> aos;
    std::vector<Age> aoi;
    std::vector<std::optional<Age>> bs_age;

    static NetworkState synchronized(std::size_t users);
    std::size_t size() const { return aos.size(); }
};

/// Random events of one slot. `channel_ok[n]` tells whether a transmission to
/// user n in this slot would succeed; it is only consulted if n is scheduled.
struct SlotDraws {
    std::vector<char> arrivals;
    std::vector<char> channel_ok;
};

struct SlotOutcome {
    std::vector<char> arrivals;
    Schedule scheduled;
    std::vector<char> delivered;
};

/// Next-slot AoS of one user.
Age step_aos(Age s, bool arrival, bool scheduled, bool success);

struct AoIStep {
    Age h;
    std::optional<Age> bs_age;

    bool operator==(const AoIStep&) const = default;
};

/// Next-slot AoI of one user together with the age of the packet held at the BS.
AoIStep step_aoi(Age h, std::optional<Age> bs_age, bool arrival, bool scheduled, bool success);

/// Applies one slot to every user in place. `bandwidth_m` bounds the schedule size.
void run_slot(NetworkState& state, std::span<const int> scheduled, const SlotDraws& draws,
              int bandwidth_m, SlotOutcome* outcome = nullptr);

/// Counter-based random streams: one independent stream per (user, purpose)
/// for each replication. The draw for slot t is a pure function of
/// (master seed, replication, user, purpose, t), so different policies see the
/// same arrivals and channel realizations.
class RandomStreams {
public:
    enum class Purpose : std::uint64_t { arrival = 1, channel = 2 };

    RandomStreams(std::uint64_t master_seed, std::uint64_t replication, std::size_t users);

    /// Uniform double in [0, 1).
    double uniform(std::size_t user, Purpose purpose, std::uint64_t t) const;

    bool arrival(std::size_t user, std::uint64_t t, double lambda) const {
        return uniform(user, Purpose::arrival, t) < lambda;
    }
    bool channel(std::size_t user, std::uint64_t t, double p) const {
        return uniform(user, Purpose::channel, t) < p;
    }

    void draw(std::uint64_t t, std::span<const UserParams> users, SlotDraws& out) const;

private:
    std::vector<std::uint64_t> arrival_keys_;
    std::vector<std::uint64_t> channel_keys_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace aos
