#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aos/core.hpp"
#include "aos/policy.hpp"

namespace aos {

/// Slots spent scheduling each user at each AoS, counted over `slots` slots.
struct Histogram {
    std::int64_t slots = 0;
    std::vector<std::vector<std::int64_t>> counts;  ///< counts[user][age]

    explicit Histogram(std::size_t users = 0) : counts(users) {}

    void add(std::size_t user, Age age);
    void merge(const Histogram& other);
    double fraction(std::size_t user, Age age) const;
    std::int64_t scheduled(std::size_t user) const;
    std::int64_t scheduled_total() const;
    /// Mean AoS at which the user was scheduled; nullopt if never scheduled.
    std::optional<double> mean_scheduled_age(std::size_t user) const;
};

struct ReplicationMetrics {
    double aos = 0.0;  ///< (1/NT) sum_t sum_n s_n(t)
    double aoi = 0.0;
    std::vector<double> user_aos;
    std::vector<double> user_aoi;
    std::vector<std::int64_t> schedule_counts;
};

struct ExperimentMetrics {
    std::string policy;
    std::int64_t horizon = 0;
    std::vector<ReplicationMetrics> replications;
    double aos_mean = 0.0;
    double aos_se = 0.0;
    double aoi_mean = 0.0;
    double aoi_se = 0.0;
    std::vector<double> user_aos_mean;
    std::vector<double> user_aoi_mean;
    std::optional<Histogram> histogram;  ///< summed over replications when recorded
    std::vector<std::string> warnings;
};

struct RunOptions {
    bool record_histogram = false;
    unsigned threads = 0;                  ///< 0: AOS_SCHED_THREADS or hardware concurrency
    std::int64_t min_schedules = 10'000;   ///< warn when a user is scheduled fewer times
};

/// Thread count from AOS_SCHED_THREADS, falling back to hardware concurrency.
unsigned default_threads();

/// One replication. Replication r draws from the substreams of
/// (network.master_seed, r), so every policy sees the same randomness.
ReplicationMetrics simulate_replication(const NetworkConfig& network, const Policy& policy, std::uint64_t replication,
                                        Histogram* histogram = nullptr);

/// Runs `replications` replications (in parallel) and aggregates mean and
/// standard error of the time-average AoS and AoI.
ExperimentMetrics run_experiment(const NetworkConfig& network, const Policy& policy, int replications,
                                 const RunOptions& options = {});

/// Occupancy histogram of an experiment; throws if recording was disabled.
const Histogram& occupancy_histogram(const ExperimentMetrics& metrics);

double mean(const std::vector<double>& xs);
/// Standard error of the mean (0 for fewer than two samples).
double standard_error(const std::vector<double>& xs);
/// Standard error of the mean per-replication difference a - b.
double paired_standard_error(const ExperimentMetrics& a, const ExperimentMetrics& b);

void write_histogram_csv(std::ostream& out, const Histogram& histogram);

/// Fixed-precision number formatting shared by every CSV writer.
std::string format_number(double x);

}  // namespace aos
