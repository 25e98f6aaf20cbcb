#include "aos/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace aos {

void Histogram::add(std::size_t user, Age age) {
    auto& row = counts.at(user);
    const auto idx = static_cast<std::size_t>(age);
    if (row.size() <= idx) row.resize(idx + 1, 0);
    ++row[idx];
}

void Histogram::merge(const Histogram& other) {
    if (counts.size() != other.counts.size()) throw ContractError("histograms cover different users");
    slots += other.slots;
    for (std::size_t u = 0; u < counts.size(); ++u) {
        auto& row = counts[u];
        const auto& src = other.counts[u];
        if (row.size() < src.size()) row.resize(src.size(), 0);
        for (std::size_t a = 0; a < src.size(); ++a) row[a] += src[a];
    }
}

double Histogram::fraction(std::size_t user, Age age) const {
    const auto& row = counts.at(user);
    const auto idx = static_cast<std::size_t>(age);
    if (slots == 0 || age < 0 || idx >= row.size()) return 0.0;
    return static_cast<double>(row[idx]) / static_cast<double>(slots);
}

std::int64_t Histogram::scheduled(std::size_t user) const {
    std::int64_t total = 0;
    for (auto c : counts.at(user)) total += c;
    return total;
}

std::int64_t Histogram::scheduled_total() const {
    std::int64_t total = 0;
    for (std::size_t u = 0; u < counts.size(); ++u) total += scheduled(u);
    return total;
}

std::optional<double> Histogram::mean_scheduled_age(std::size_t user) const {
    const auto& row = counts.at(user);
    double weighted = 0.0;
    std::int64_t total = 0;
    for (std::size_t a = 0; a < row.size(); ++a) {
        weighted += static_cast<double>(a) * static_cast<double>(row[a]);
        total += row[a];
    }
    if (total == 0) return std::nullopt;
    return weighted / static_cast<double>(total);
}

unsigned default_threads() {
    if (const char* env = std::getenv("AOS_SCHED_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

ReplicationMetrics simulate_replication(const NetworkConfig& network, const Policy& policy, std::uint64_t replication,
                                        Histogram* histogram) {
    network.validate();
    const std::size_t n = network.size();
    const RandomStreams streams(network.master_seed, replication, n);
    NetworkState state = NetworkState::synchronized(n);
    SlotDraws draws;
    Schedule schedule;
    schedule.reserve(static_cast<std::size_t>(network.bandwidth_m) + n);

    ReplicationMetrics out;
    out.schedule_counts.assign(n, 0);
    std::vector<double> aos_sum(n, 0.0), aoi_sum(n, 0.0);

    for (std::int64_t t = 1; t <= network.horizon_t; ++t) {
        for (std::size_t u = 0; u < n; ++u) {
            aos_sum[u] += static_cast<double>(state.aos[u]);
            aoi_sum[u] += static_cast<double>(state.aoi[u]);
        }
        policy.decide(state, schedule);
        for (int u : schedule) {
            ++out.schedule_counts[static_cast<std::size_t>(u)];
            if (histogram) histogram->add(static_cast<std::size_t>(u), state.aos[static_cast<std::size_t>(u)]);
        }
        streams.draw(static_cast<std::uint64_t>(t), network.users, draws);
        run_slot(state, schedule, draws, network.bandwidth_m);
    }
    if (histogram) histogram->slots += network.horizon_t;

    const double horizon = static_cast<double>(network.horizon_t);
    out.user_aos.resize(n);
    out.user_aoi.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        out.user_aos[u] = aos_sum[u] / horizon;
        out.user_aoi[u] = aoi_sum[u] / horizon;
        out.aos += out.user_aos[u];
        out.aoi += out.user_aoi[u];
    }
    out.aos /= static_cast<double>(n);
    out.aoi /= static_cast<double>(n);
    return out;
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double total = 0.0;
    for (double x : xs) total += x;
    return total / static_cast<double>(xs.size());
}

double standard_error(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    const double var = ss / static_cast<double>(xs.size() - 1);
    return std::sqrt(var / static_cast<double>(xs.size()));
}

double paired_standard_error(const ExperimentMetrics& a, const ExperimentMetrics& b) {
    if (a.replications.size() != b.replications.size())
        throw ContractError("paired comparison needs the same number of replications");
    std::vector<double> diff;
    diff.reserve(a.replications.size());
    for (std::size_t r = 0; r < a.replications.size(); ++r)
        diff.push_back(a.replications[r].aos - b.replications[r].aos);
    return standard_error(diff);
}

ExperimentMetrics run_experiment(const NetworkConfig& network, const Policy& policy, int replications,
                                 const RunOptions& options) {
    network.validate();
    if (replications < 1) throw ContractError("replications must be at least 1");
    const std::size_t n = network.size();
    const auto reps = static_cast<std::size_t>(replications);

    ExperimentMetrics metrics;
    metrics.policy = std::string(policy.name());
    metrics.horizon = network.horizon_t;
    metrics.replications.resize(reps);
    std::vector<Histogram> histograms(options.record_histogram ? reps : 0, Histogram(n));

    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads ? options.threads : default_threads(),
                                                             static_cast<unsigned>(reps)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= reps) return;
            try {
                metrics.replications[r] = simulate_replication(network, policy, r,
                                                               options.record_histogram ? &histograms[r] : nullptr);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<double> aos, aoi;
    metrics.user_aos_mean.assign(n, 0.0);
    metrics.user_aoi_mean.assign(n, 0.0);
    for (const auto& r : metrics.replications) {
        aos.push_back(r.aos);
        aoi.push_back(r.aoi);
        for (std::size_t u = 0; u < n; ++u) {
            metrics.user_aos_mean[u] += r.user_aos[u] / static_cast<double>(reps);
            metrics.user_aoi_mean[u] += r.user_aoi[u] / static_cast<double>(reps);
        }
    }
    metrics.aos_mean = mean(aos);
    metrics.aos_se = standard_error(aos);
    metrics.aoi_mean = mean(aoi);
    metrics.aoi_se = standard_error(aoi);

    if (options.record_histogram) {
        Histogram total(n);
        for (const auto& h : histograms) total.merge(h);
        metrics.histogram = std::move(total);
    }

    for (std::size_t u = 0; u < n; ++u) {
        std::int64_t fewest = metrics.replications.front().schedule_counts[u];
        for (const auto& r : metrics.replications) fewest = std::min(fewest, r.schedule_counts[u]);
        if (fewest < options.min_schedules)
            metrics.warnings.push_back("policy " + metrics.policy + ": user " + std::to_string(u) + " scheduled only " +
                                       std::to_string(fewest) + " times in some replication");
    }
    return metrics;
}

const Histogram& occupancy_histogram(const ExperimentMetrics& metrics) {
    if (!metrics.histogram) throw ContractError("occupancy recording was disabled for this experiment");
    return *metrics.histogram;
}

std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

void write_histogram_csv(std::ostream& out, const Histogram& histogram) {
    out << "user,age,fraction\n";
    for (std::size_t u = 0; u < histogram.counts.size(); ++u) {
        const auto& row = histogram.counts[u];
        for (std::size_t a = 0; a < row.size(); ++a)
            if (row[a] > 0) out << u << ',' << a << ',' << format_number(histogram.fraction(u, static_cast<Age>(a))) << '\n';
    }
}

}  // namespace aos
