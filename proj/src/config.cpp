#include "aos/config.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "aos/bound.hpp"
#include "json.hpp"

namespace aos {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ContractError("unknown field '" + key + "' in " + where);
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ContractError(std::string("field '") + key + "': " + e.what());
    }
}

bool is_integral(double x) { return std::isfinite(x) && std::floor(x) == x; }

}  // namespace

void ExperimentConfig::validate() const {
    if (replications < 1) throw ContractError("replications must be at least 1");
    if (horizon_t < 1) throw ContractError("T must be positive");
    if (policies.empty()) throw ContractError("at least one policy is required");
    for (const auto& name : policies)
        if (!is_known_policy(name)) throw ContractError("unknown policy name: " + name);
    if (mdp_truncation < 2) throw ContractError("m must be at least 2");
    if (!(mdp_discount > 0.0 && mdp_discount < 1.0)) throw ContractError("alpha must lie in (0, 1)");
    static const std::set<std::string> generators{"explicit", "rate_ramp", "lambda_ramp", "p_ramp"};
    if (!generators.count(generator.type)) throw ContractError("unknown generator type: " + generator.type);
    if (sweep) {
        if (sweep->values.empty()) throw ContractError("sweep grid must not be empty");
        if (sweep->param != "lambda_total" && sweep->param != "n")
            throw ContractError("sweep param must be 'lambda_total' or 'n'");
        if (sweep->param == "n") {
            if (generator.type == "explicit") throw ContractError("sweeping n needs a generator");
            for (double v : sweep->values)
                if (!is_integral(v) || v < 1) throw ContractError("sweep over n needs positive integers");
        }
        for (double v : sweep->values) network({{sweep->param, v}}).validate();
    } else {
        network().validate();
    }
}

NetworkConfig ExperimentConfig::network(const std::optional<std::pair<std::string, double>>& point) const {
    std::optional<double> total = lambda_total;
    if (!total && generator.lambda_total > 0.0) total = generator.lambda_total;
    int n_users = generator.users;
    if (point) {
        if (point->first == "lambda_total")
            total = point->second;
        else if (point->first == "n")
            n_users = static_cast<int>(point->second);
        else
            throw ContractError("unknown sweep parameter: " + point->first);
    }

    NetworkConfig net;
    net.bandwidth_m = bandwidth_m;
    net.horizon_t = horizon_t;
    net.master_seed = seed;

    const std::string& type = generator.type;
    if (type == "explicit") {
        if (users.empty()) throw ContractError("config needs users[] or a generator");
        for (const auto& u : users) {
            UserParams up;
            up.p = u.p;
            if (u.lambda) {
                up.lambda = *u.lambda;
            } else if (u.lambda_weight) {
                if (!total) throw ContractError("lambda_weight needs lambda_total");
                up.lambda = *u.lambda_weight * *total;
            } else {
                throw ContractError("each user needs lambda or lambda_weight");
            }
            net.users.push_back(up);
        }
        return net;
    }

    if (n_users < 1) throw ContractError("generator needs n >= 1");
    const double n_d = static_cast<double>(n_users);
    for (int i = 1; i <= n_users; ++i) {
        const double k = static_cast<double>(i);
        UserParams up;
        if (type == "rate_ramp") {
            if (!total) throw ContractError("rate_ramp generator needs lambda_total");
            up.lambda = 2.0 * k / (n_d * (n_d + 1.0)) * *total;
            up.p = k / n_d;
        } else if (type == "lambda_ramp") {
            up.lambda = generator.lambda_scale * k / n_d;
            up.p = generator.p;
        } else if (type == "p_ramp") {
            up.lambda = generator.lambda;
            up.p = k / n_d;
        } else {
            throw ContractError("unknown generator type: " + type);
        }
        net.users.push_back(up);
    }
    return net;
}

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ContractError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ContractError("config must be a JSON object");
    reject_unknown(doc,
                   {"users", "generator", "lambda_total", "bandwidth", "T", "replications", "seed", "policies", "sweep",
                    "m", "alpha", "output", "histogram"},
                   "config");

    ExperimentConfig cfg;
    if (doc.contains("users")) {
        if (!doc["users"].is_array()) throw ContractError("users must be an array");
        for (const auto& u : doc["users"]) {
            if (!u.is_object()) throw ContractError("each user must be an object");
            reject_unknown(u, {"lambda", "lambda_weight", "p"}, "user");
            UserSpec spec;
            if (u.contains("lambda")) spec.lambda = get_or<double>(u, "lambda", 0.0);
            if (u.contains("lambda_weight")) spec.lambda_weight = get_or<double>(u, "lambda_weight", 0.0);
            if (!u.contains("p")) throw ContractError("each user needs p");
            spec.p = get_or<double>(u, "p", 0.0);
            cfg.users.push_back(spec);
        }
    }
    if (doc.contains("generator")) {
        const auto& g = doc["generator"];
        if (!g.is_object()) throw ContractError("generator must be an object");
        reject_unknown(g, {"type", "n", "lambda_total", "lambda", "lambda_scale", "p"}, "generator");
        cfg.generator.type = get_or<std::string>(g, "type", "explicit");
        cfg.generator.users = get_or<int>(g, "n", 0);
        cfg.generator.lambda_total = get_or<double>(g, "lambda_total", 0.0);
        cfg.generator.lambda = get_or<double>(g, "lambda", 0.0);
        cfg.generator.lambda_scale = get_or<double>(g, "lambda_scale", 0.0);
        cfg.generator.p = get_or<double>(g, "p", 0.0);
    }
    if (doc.contains("lambda_total")) cfg.lambda_total = get_or<double>(doc, "lambda_total", 0.0);
    cfg.bandwidth_m = get_or<int>(doc, "bandwidth", cfg.bandwidth_m);
    cfg.horizon_t = get_or<std::int64_t>(doc, "T", cfg.horizon_t);
    cfg.replications = get_or<int>(doc, "replications", cfg.replications);
    cfg.seed = get_or<std::uint64_t>(doc, "seed", cfg.seed);
    if (doc.contains("policies")) cfg.policies = get_or<std::vector<std::string>>(doc, "policies", {});
    if (doc.contains("sweep")) {
        const auto& s = doc["sweep"];
        if (!s.is_object()) throw ContractError("sweep must be an object");
        reject_unknown(s, {"param", "values"}, "sweep");
        cfg.sweep = SweepSpec{get_or<std::string>(s, "param", ""), get_or<std::vector<double>>(s, "values", {})};
    }
    cfg.mdp_truncation = get_or<int>(doc, "m", cfg.mdp_truncation);
    cfg.mdp_discount = get_or<double>(doc, "alpha", cfg.mdp_discount);
    cfg.output = get_or<std::string>(doc, "output", "");
    cfg.histogram = get_or<std::string>(doc, "histogram", "");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    std::vector<std::optional<std::pair<std::string, double>>> points;
    if (config.sweep)
        for (double v : config.sweep->values) points.emplace_back(std::make_pair(config.sweep->param, v));
    else
        points.emplace_back(std::nullopt);

    const PolicyOptions policy_options{config.mdp_truncation, config.mdp_discount};
    std::vector<SweepRow> rows;
    for (const auto& point : points) {
        const NetworkConfig net = config.network(point);
        const double lb = bound::solve_bound(net.users).aos_lb;
        for (const auto& name : config.policies) {
            const auto policy = make_policy(name, net, policy_options);
            SweepRow row;
            row.param = point ? point->first : "";
            row.value = point ? point->second : 0.0;
            row.metrics = run_experiment(net, *policy, config.replications, options);
            row.aos_lb = lb;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "sweep_param,sweep_value,policy,replication,aos,aos_se,aoi,aoi_se,aos_lb\n";
    for (const auto& row : rows) {
        const std::string value = row.param.empty() ? "" : format_number(row.value);
        const std::string lb = format_number(row.aos_lb);
        const auto& m = row.metrics;
        for (std::size_t r = 0; r < m.replications.size(); ++r)
            out << row.param << ',' << value << ',' << m.policy << ',' << r << ','
                << format_number(m.replications[r].aos) << ",," << format_number(m.replications[r].aoi) << ",," << lb
                << '\n';
        out << row.param << ',' << value << ',' << m.policy << ",all," << format_number(m.aos_mean) << ','
            << format_number(m.aos_se) << ',' << format_number(m.aoi_mean) << ',' << format_number(m.aoi_se) << ','
            << lb << '\n';
    }
}

}  // namespace aos
