#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aos/bandit.hpp"
#include "aos/bound.hpp"
#include "aos/config.hpp"
#include "aos/mdp.hpp"
#include "aos/sim.hpp"
#include "aos/verify.hpp"

namespace {

using namespace aos;

// Where CSV output goes: a file when a path is given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (path.empty()) return;
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) throw std::runtime_error("cannot open output file: " + path);
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::string with_suffix(const std::string& path, const std::string& suffix) {
    const auto dot = path.rfind('.');
    const auto slash = path.rfind('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + "_" + suffix;
    return path.substr(0, dot) + "_" + suffix + path.substr(dot);
}

void report_warnings(const std::vector<SweepRow>& rows) {
    for (const auto& row : rows)
        for (const auto& w : row.metrics.warnings) std::cerr << "warning: " << w << '\n';
}

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> horizon;
    std::optional<int> replications;
    std::vector<std::string> policies;
    std::string output;
    std::string histogram;
};

ExperimentConfig load_with_overrides(const RunArgs& args) {
    ExperimentConfig cfg = load_config(args.config);
    if (args.seed) cfg.seed = *args.seed;
    if (args.horizon) cfg.horizon_t = *args.horizon;
    if (args.replications) cfg.replications = *args.replications;
    if (!args.policies.empty()) cfg.policies = args.policies;
    if (!args.histogram.empty()) cfg.histogram = args.histogram;
    cfg.validate();
    return cfg;
}

int run_experiments(const RunArgs& args, bool sweep) {
    ExperimentConfig cfg = load_with_overrides(args);
    if (!sweep) cfg.sweep.reset();
    if (sweep && !cfg.sweep) throw ContractError("config has no sweep section");
    RunOptions options;
    options.record_histogram = !cfg.histogram.empty();
    const auto rows = run_sweep(cfg, options);
    report_warnings(rows);
    Sink sink(args.output.empty() ? cfg.output : args.output);
    write_results_csv(sink.stream(), rows);

    if (!cfg.histogram.empty()) {
        for (const auto& row : rows) {
            std::string path = cfg.histogram;
            if (rows.size() > 1) {
                path = with_suffix(path, row.metrics.policy);
                if (!row.param.empty()) path = with_suffix(path, format_number(row.value));
            }
            Sink out(path);
            write_histogram_csv(out.stream(), occupancy_histogram(row.metrics));
        }
    }
    return 0;
}

int run_bound(const std::string& config_path, std::optional<double> lambda_total) {
    const ExperimentConfig cfg = load_config(config_path);
    std::optional<std::pair<std::string, double>> point;
    if (lambda_total) point = std::make_pair(std::string("lambda_total"), *lambda_total);
    const NetworkConfig net = cfg.network(point);
    net.validate();
    const auto sol = bound::solve_bound(net.users);
    std::cout << "aos_lb," << format_number(sol.aos_lb) << '\n';
    std::cout << "mu," << format_number(sol.mu) << '\n';
    std::cout << "binding," << (sol.binding ? 1 : 0) << '\n';
    std::cout << "user,lambda,p,gamma\n";
    for (std::size_t n = 0; n < net.size(); ++n)
        std::cout << n << ',' << format_number(net.users[n].lambda) << ',' << format_number(net.users[n].p) << ','
                  << format_number(sol.gamma[n]) << '\n';
    return 0;
}

int run_index_table(double lambda, double p, Age s_max, double w_max, double w_step) {
    UserParams{lambda, p}.validate();
    if (s_max < 1) throw ContractError("--s-max must be at least 1");
    if (!(w_step > 0.0) || w_max < 0.0) throw ContractError("W grid needs step > 0 and max >= 0");
    std::cout << "s,index\n";
    for (Age s = 1; s <= s_max; ++s) std::cout << s << ',' << format_number(bandit::whittle_index(s, lambda, p)) << '\n';
    std::cout << "\nW,tau_opt\n";
    const auto steps = static_cast<long>(std::floor(w_max / w_step + 1e-9));
    for (long i = 0; i <= steps; ++i) {
        const double w = static_cast<double>(i) * w_step;
        std::cout << format_number(w) << ',' << bandit::optimal_threshold({lambda, p, w}) << '\n';
    }
    return 0;
}

struct MdpArgs {
    std::string config;
    std::optional<double> lambda_total;
    std::optional<int> cap;
    std::optional<double> discount;
    std::string solver = "structural";
    std::string policy_csv;
    std::string policy_bin;
};

int run_mdp(const MdpArgs& args) {
    ExperimentConfig cfg = load_config(args.config);
    if (args.cap) cfg.mdp_truncation = *args.cap;
    if (args.discount) cfg.mdp_discount = *args.discount;
    if (cfg.mdp_truncation < 2) throw ContractError("m must be at least 2");
    if (!(cfg.mdp_discount > 0.0 && cfg.mdp_discount < 1.0)) throw ContractError("alpha must lie in (0, 1)");
    std::optional<std::pair<std::string, double>> point;
    if (args.lambda_total) point = std::make_pair(std::string("lambda_total"), *args.lambda_total);
    const NetworkConfig net = cfg.network(point);
    net.validate();

    const mdp::TruncatedModel model(net.users, cfg.mdp_truncation);
    mdp::PolicyIterationResult result;
    if (args.solver == "structural")
        result = mdp::structural_policy_iteration(model, cfg.mdp_discount);
    else if (args.solver == "plain")
        result = mdp::plain_policy_iteration(model, cfg.mdp_discount);
    else
        throw ContractError("unknown solver: " + args.solver);

    if (!args.policy_csv.empty()) {
        Sink out(args.policy_csv);
        mdp::write_policy_csv(out.stream(), model, result.policy);
    }
    if (!args.policy_bin.empty()) {
        Sink out(args.policy_bin);
        mdp::write_policy_binary(out.stream(), result.policy);
    }

    const auto report = mdp::verify_structure(model, result.values);
    std::cout << "states," << model.state_count() << '\n';
    std::cout << "iterations," << result.iterations << '\n';
    std::cout << "propagated_states," << result.propagated_states << '\n';
    std::cout << "monotonicity_checks," << report.monotonicity_checks << '\n';
    std::cout << "submodularity_checks," << report.submodularity_checks << '\n';
    std::cout << "persistence_checks," << report.persistence_checks << '\n';
    for (auto kind : {mdp::Violation::Kind::monotonicity, mdp::Violation::Kind::submodularity,
                      mdp::Violation::Kind::persistence})
        std::cout << mdp::to_string(kind) << "_violations," << report.count(kind) << '\n';
    std::cout << "supermodularity_failures," << report.supermodularity_failures << '\n';
    for (const auto& v : report.violations) {
        std::cerr << "violation " << mdp::to_string(v.kind) << " at (";
        for (std::size_t i = 0; i < v.state.size(); ++i) std::cerr << (i ? "," : "") << v.state[i];
        std::cerr << "): " << v.detail << '\n';
    }
    return 0;
}

int run_verify(const VerifyOptions& options, const std::string& output) {
    const auto checks = run_verify_suite(options);
    Sink sink(output);
    write_verify_csv(sink.stream(), checks);
    int failed = 0;
    for (const auto& c : checks)
        if (!c.passed) {
            ++failed;
            std::cerr << "check failed: " << c.name << " value " << format_number(c.value) << " reference "
                      << format_number(c.reference) << '\n';
        }
    return failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AoS scheduling simulator and solvers"};
    app.require_subcommand(1);

    RunArgs sim_args, sweep_args;
    auto add_run_options = [](CLI::App* cmd, RunArgs& a) {
        cmd->add_option("--config", a.config, "JSON experiment config")->required();
        cmd->add_option("--seed", a.seed, "override the config seed");
        cmd->add_option("--T", a.horizon, "override the horizon");
        cmd->add_option("--replications", a.replications, "override the replication count");
        cmd->add_option("--policy", a.policies, "policies to run (repeatable)");
        cmd->add_option("--output", a.output, "results CSV (default: config output or stdout)");
        cmd->add_option("--histogram", a.histogram, "occupancy histogram CSV");
    };
    auto* simulate = app.add_subcommand("simulate", "run policies on one configuration");
    add_run_options(simulate, sim_args);
    auto* sweep = app.add_subcommand("sweep", "run policies over the config's sweep grid");
    add_run_options(sweep, sweep_args);

    std::string bound_config;
    std::optional<double> bound_total;
    auto* bound_cmd = app.add_subcommand("bound", "AoS lower bound and optimal delivery rates");
    bound_cmd->add_option("--config", bound_config)->required();
    bound_cmd->add_option("--lambda-total", bound_total);

    double it_lambda = 1.0, it_p = 1.0, it_w_max = 50.0, it_w_step = 0.5;
    Age it_s_max = 20;
    auto* index_cmd = app.add_subcommand("index-table", "Whittle index and optimal threshold tables");
    index_cmd->add_option("--lambda", it_lambda)->required();
    index_cmd->add_option("--p", it_p)->required();
    index_cmd->add_option("--s-max", it_s_max);
    index_cmd->add_option("--w-max", it_w_max);
    index_cmd->add_option("--w-step", it_w_step);

    MdpArgs mdp_args;
    auto* mdp_cmd = app.add_subcommand("mdp", "solve the truncated MDP and check its structure");
    mdp_cmd->add_option("--config", mdp_args.config)->required();
    mdp_cmd->add_option("--lambda-total", mdp_args.lambda_total);
    mdp_cmd->add_option("--m", mdp_args.cap, "age cap");
    mdp_cmd->add_option("--alpha", mdp_args.discount, "discount factor");
    mdp_cmd->add_option("--solver", mdp_args.solver, "structural or plain");
    mdp_cmd->add_option("--policy-csv", mdp_args.policy_csv);
    mdp_cmd->add_option("--policy-bin", mdp_args.policy_bin);

    VerifyOptions verify_opts;
    std::string verify_output;
    auto* verify_cmd = app.add_subcommand("verify", "run the invariant suite");
    verify_cmd->add_option("--seed", verify_opts.seed);
    verify_cmd->add_option("--T", verify_opts.horizon);
    verify_cmd->add_option("--replications", verify_opts.replications);
    verify_cmd->add_option("--output", verify_output);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*simulate) return run_experiments(sim_args, false);
        if (*sweep) return run_experiments(sweep_args, true);
        if (*bound_cmd) return run_bound(bound_config, bound_total);
        if (*index_cmd) return run_index_table(it_lambda, it_p, it_s_max, it_w_max, it_w_step);
        if (*mdp_cmd) return run_mdp(mdp_args);
        if (*verify_cmd) return run_verify(verify_opts, verify_output);
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
