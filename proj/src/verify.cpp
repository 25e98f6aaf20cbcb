#include "aos/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "aos/bandit.hpp"
#include "aos/bound.hpp"
#include "aos/mdp.hpp"
#include "aos/sim.hpp"

namespace aos {

namespace {

class Suite {
public:
    void near(std::string name, double value, double reference, double tolerance) {
        const bool ok = std::abs(value - reference) <= tolerance;
        checks_.push_back({std::move(name), value, reference, tolerance, ok});
    }
    void at_most(std::string name, double value, double limit) {
        checks_.push_back({std::move(name), value, limit, 0.0, value <= limit});
    }
    void truth(std::string name, bool ok) {
        checks_.push_back({std::move(name), ok ? 1.0 : 0.0, 1.0, 0.0, ok});
    }
    std::vector<VerifyCheck> take() { return std::move(checks_); }

private:
    std::vector<VerifyCheck> checks_;
};

void bandit_checks(Suite& suite) {
    double worst = 0.0;
    for (int k = 1; k <= 10; ++k) {
        const double p = 0.1 * k;
        for (Age s = 1; s <= 100; ++s) {
            const double x = static_cast<double>(s);
            const double ref = p * x / 2.0 * (x + (2.0 - p) / p);
            worst = std::max(worst, std::abs(bandit::whittle_index(s, 1.0, p) - ref) / ref);
        }
    }
    suite.at_most("bandit.whittle_lambda1_rel_err", worst, 1e-10);

    int mismatches = 0;
    for (double lambda : {0.2, 0.5, 0.9})
        for (double p : {0.3, 0.6, 1.0})
            for (double w = 0.0; w <= 30.0; w += 0.7) {
                const bandit::BanditParams params{lambda, p, w};
                const int tau = bandit::optimal_threshold(params);
                double best = bandit::avg_cost(1, params);
                for (int t = 2; t <= 200; ++t) best = std::min(best, bandit::avg_cost(t, params));
                if (bandit::avg_cost(tau, params) > best + 1e-9 * std::max(1.0, best)) ++mismatches;
            }
    suite.near("bandit.threshold_vs_argmin_mismatches", mismatches, 0.0, 0.0);

    for (const bandit::BanditParams params : {bandit::BanditParams{0.4, 0.5, 3.3}, bandit::BanditParams{0.8, 0.9, 12.1}}) {
        const auto dp = bandit::dp_oracle(params);
        const int tau = bandit::optimal_threshold(params);
        suite.near("bandit.dp_threshold", dp.threshold, tau, 0.0);
        suite.near("bandit.dp_avg_cost", dp.avg_cost, bandit::avg_cost(tau, params), 1e-6);
    }

    std::vector<double> grid;
    for (int i = 0; i <= 400; ++i) grid.push_back(0.25 * i);
    bool indexable = true;
    for (double lambda : {0.1, 0.5, 1.0})
        for (double p : {0.1, 0.5, 1.0}) indexable = indexable && bandit::certify_indexability(lambda, p, grid).indexable;
    suite.truth("bandit.indexable", indexable);
}

void bound_checks(Suite& suite) {
    const std::vector<UserParams> fig2{{0.36, 0.2}, {0.48, 0.55}, {0.36, 0.9}};
    const auto sol = bound::solve_bound(fig2);
    suite.truth("bound.fig2_binding", sol.binding);
    suite.near("bound.fig2_bandwidth_usage", bound::bandwidth_usage(fig2, sol.gamma), 1.0, 1e-9);
    suite.near("bound.single_perfect", bound::solve_bound(std::vector<UserParams>{{1.0, 1.0}}).aos_lb, 1.0, 1e-12);
    suite.near("bound.two_perfect", bound::solve_bound(std::vector<UserParams>{{1.0, 1.0}, {1.0, 1.0}}).aos_lb, 1.5,
               1e-9);
}

void mdp_checks(Suite& suite) {
    const mdp::TruncatedModel model({{0.3, 0.2}, {0.4, 0.55}}, 10);
    const auto structural = mdp::structural_policy_iteration(model, 0.95);
    const auto plain = mdp::plain_policy_iteration(model, 0.95);
    double diff = 0.0;
    for (std::size_t i = 0; i < model.state_count(); ++i)
        diff = std::max(diff, std::abs(structural.values.values[i] - plain.values.values[i]));
    suite.at_most("mdp.structural_vs_plain_max_diff", diff, 1e-8);
    const auto report = mdp::verify_structure(model, structural.values);
    for (auto kind : {mdp::Violation::Kind::monotonicity, mdp::Violation::Kind::submodularity,
                      mdp::Violation::Kind::persistence})
        suite.near(std::string("mdp.") + mdp::to_string(kind) + "_violations", report.count(kind), 0.0, 0.0);
    suite.near("mdp.supermodularity_failures", report.supermodularity_failures, 0.0, 0.0);
}

void sim_checks(Suite& suite, const VerifyOptions& options) {
    RunOptions run;
    run.threads = 1;
    run.min_schedules = 0;
    run.record_histogram = true;

    NetworkConfig single{{{1.0, 1.0}}, 1, options.horizon, options.seed};
    const auto whittle = make_policy("whittle", single);
    const auto one = run_experiment(single, *whittle, options.replications, run);
    // the first slot starts synchronized, every later one at age 1
    const double expected = static_cast<double>(options.horizon - 1) / static_cast<double>(options.horizon);
    suite.near("sim.single_perfect_aos", one.aos_mean, expected, 1e-12);

    NetworkConfig pair{{{1.0, 1.0}, {1.0, 1.0}}, 1, options.horizon, options.seed};
    const auto greedy = make_policy("greedy", pair);
    const auto two = run_experiment(pair, *greedy, options.replications, run);
    suite.near("sim.two_perfect_greedy_aos", two.aos_mean, 1.5, 1e-4);

    NetworkConfig brief = pair;
    brief.horizon_t = 1;
    suite.near("sim.first_slot_aos", run_experiment(brief, *greedy, 1, run).aos_mean, 0.0, 0.0);

    NetworkConfig fig2{{{0.36, 0.2}, {0.48, 0.55}, {0.36, 0.9}}, 1, options.horizon, options.seed};
    const double lb = bound::solve_bound(fig2.users).aos_lb;
    for (const char* name : {"whittle", "greedy", "aoi"}) {
        const auto policy = make_policy(name, fig2);
        const auto m = run_experiment(fig2, *policy, options.replications, run);
        suite.near(std::string("sim.fig2_") + name + "_aos", m.aos_mean, m.aos_mean, 0.0);
        suite.at_most(std::string("sim.fig2_") + name + "_above_bound", lb - 3.0 * m.aos_se, m.aos_mean);
        const auto& hist = occupancy_histogram(m);
        std::int64_t scheduled = 0;
        for (const auto& r : m.replications)
            for (auto c : r.schedule_counts) scheduled += c;
        suite.near(std::string("sim.fig2_") + name + "_histogram_mass", hist.scheduled_total(), scheduled, 0.0);
    }
}

}  // namespace

std::vector<VerifyCheck> run_verify_suite(const VerifyOptions& options) {
    Suite suite;
    bandit_checks(suite);
    bound_checks(suite);
    mdp_checks(suite);
    sim_checks(suite, options);
    return suite.take();
}

void write_verify_csv(std::ostream& out, const std::vector<VerifyCheck>& checks) {
    out << "name,value,reference,tolerance,passed\n";
    for (const auto& c : checks)
        out << c.name << ',' << format_number(c.value) << ',' << format_number(c.reference) << ','
            << format_number(c.tolerance) << ',' << (c.passed ? 1 : 0) << '\n';
}

}  // namespace aos
