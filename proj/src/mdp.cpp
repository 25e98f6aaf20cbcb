#include "aos/mdp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace aos::mdp {

namespace {

constexpr std::size_t kMaxUsers = 8;
constexpr std::size_t kMaxStates = 5'000'000;

struct Row {
    int count = 0;
    std::array<std::size_t, 3> offset{};
    std::array<double, 3> prob{};

    void add(std::size_t off, double pr) {
        if (pr <= 0.0) return;
        offset[count] = off;
        prob[count] = pr;
        ++count;
    }
};

Row user_row(int age, bool scheduled, const UserParams& u, int cap, std::size_t stride) {
    Row r;
    if (age == 0) {
        r.add(0, 1.0 - u.lambda);
        r.add(stride, u.lambda);
        return r;
    }
    const auto up = static_cast<std::size_t>(std::min(age + 1, cap)) * stride;
    if (!scheduled) {
        r.add(up, 1.0);
        return r;
    }
    r.add(0, (1.0 - u.lambda) * u.p);
    r.add(stride, u.lambda * u.p);
    r.add(up, 1.0 - u.p);
    return r;
}

bool tie_or_worse(double candidate, double best) {
    return !(candidate < best - 1e-12 * std::max(1.0, std::abs(best)));
}

}  // namespace

TruncatedModel::TruncatedModel(std::vector<UserParams> users, int cap) : users_(std::move(users)), cap_(cap) {
    if (users_.empty()) throw ContractError("truncated model needs at least one user");
    if (users_.size() > kMaxUsers) throw ContractError("truncated model supports at most 8 users");
    if (cap_ < 1) throw ContractError("truncation cap must be at least 1");
    for (const auto& u : users_) u.validate();
    strides_.resize(users_.size());
    std::size_t count = 1;
    // The first user is the most significant digit, so index order is lexicographic.
    for (std::size_t n = users_.size(); n-- > 0;) {
        strides_[n] = count;
        count *= static_cast<std::size_t>(cap_) + 1;
        if (count > kMaxStates) throw ContractError("truncated state space too large");
    }
    state_count_ = count;
}

std::size_t TruncatedModel::index_of(std::span<const int> ages) const {
    if (ages.size() != users_.size()) throw ContractError("state has the wrong number of users");
    std::size_t idx = 0;
    for (std::size_t n = 0; n < ages.size(); ++n) {
        if (ages[n] < 0 || ages[n] > cap_) throw ContractError("truncated age out of [0, m]");
        idx += static_cast<std::size_t>(ages[n]) * strides_[n];
    }
    return idx;
}

void TruncatedModel::decode(std::size_t index, std::span<int> ages) const {
    for (std::size_t n = 0; n < users_.size(); ++n) {
        ages[n] = static_cast<int>(index / strides_[n]);
        index %= strides_[n];
    }
}

std::vector<int> TruncatedModel::state(std::size_t index) const {
    std::vector<int> ages(users_.size());
    decode(index, ages);
    return ages;
}

double TruncatedModel::cost(std::span<const int> ages) const {
    double total = 0.0;
    for (int a : ages) total += a;
    return total / static_cast<double>(ages.size());
}

double TruncatedModel::expected(std::span<const double> values, std::span<const int> ages, int action) const {
    const std::size_t n_users = users_.size();
    std::array<Row, kMaxUsers> rows;
    for (std::size_t n = 0; n < n_users; ++n)
        rows[n] = user_row(ages[n], action == static_cast<int>(n), users_[n], cap_, strides_[n]);
    std::array<int, kMaxUsers> pick{};
    double total = 0.0;
    for (;;) {
        std::size_t off = 0;
        double pr = 1.0;
        for (std::size_t n = 0; n < n_users; ++n) {
            off += rows[n].offset[pick[n]];
            pr *= rows[n].prob[pick[n]];
        }
        total += pr * values[off];
        std::size_t n = n_users;
        while (n-- > 0) {
            if (++pick[n] < rows[n].count) break;
            pick[n] = 0;
        }
        if (n == static_cast<std::size_t>(-1)) break;
    }
    return total;
}

double TruncatedModel::q_value(std::span<const double> values, std::span<const int> ages, int action,
                               double discount) const {
    return cost(ages) + discount * expected(values, ages, action);
}

std::vector<Transition> TruncatedModel::kernel(std::span<const int> ages, int action) const {
    index_of(ages);
    if (action != kIdle && (action < 0 || action >= static_cast<int>(users_.size())))
        throw ContractError("action must be idle or a user index");

    std::vector<Transition> out;
    std::vector<Row> rows(users_.size());
    for (std::size_t n = 0; n < users_.size(); ++n)
        rows[n] = user_row(ages[n], action == static_cast<int>(n), users_[n], cap_, strides_[n]);
    std::vector<int> pick(users_.size(), 0);
    for (;;) {
        std::size_t off = 0;
        double pr = 1.0;
        for (std::size_t n = 0; n < users_.size(); ++n) {
            off += rows[n].offset[pick[n]];
            pr *= rows[n].prob[pick[n]];
        }
        out.push_back({off, pr});
        std::size_t n = users_.size();
        while (n-- > 0) {
            if (++pick[n] < rows[n].count) break;
            pick[n] = 0;
        }
        if (n == static_cast<std::size_t>(-1)) break;
    }
    std::sort(out.begin(), out.end(), [](const Transition& a, const Transition& b) { return a.to < b.to; });
    std::vector<Transition> merged;
    for (const auto& t : out) {
        if (!merged.empty() && merged.back().to == t.to)
            merged.back().prob += t.prob;
        else
            merged.push_back(t);
    }
    return merged;
}

int StationaryPolicy::action_for(std::span<const Age> ages) const {
    if (ages.size() != users) throw ContractError("state has the wrong number of users");
    std::size_t idx = 0;
    for (std::size_t n = 0; n < users; ++n) {
        const auto a = static_cast<std::size_t>(std::clamp<Age>(ages[n], 0, cap));
        idx = idx * (static_cast<std::size_t>(cap) + 1) + a;
    }
    return actions[idx];
}

int greedy_action(const TruncatedModel& model, std::span<const double> values, std::span<const int> ages,
                  double discount) {
    int best_action = kIdle;
    double best = model.q_value(values, ages, kIdle, discount);
    for (int a = 0; a < static_cast<int>(model.users()); ++a) {
        if (ages[a] == 0) continue;  // identical to idling
        const double q = model.q_value(values, ages, a, discount);
        if (!tie_or_worse(q, best)) {
            best = q;
            best_action = a;
        }
    }
    return best_action;
}

StationaryPolicy greedy_policy(const TruncatedModel& model, const ValueTable& values) {
    StationaryPolicy pol{std::vector<int>(model.state_count(), kIdle), model.cap(), model.users()};
    std::vector<int> ages(model.users());
    for (std::size_t s = 0; s < model.state_count(); ++s) {
        model.decode(s, ages);
        pol.actions[s] = greedy_action(model, values.values, ages, values.discount);
    }
    return pol;
}

namespace {

void check_discount(double discount) {
    if (!(discount > 0.0 && discount < 1.0)) throw ContractError("discount must lie in (0, 1)");
}

StationaryPolicy max_age_policy(const TruncatedModel& model) {
    StationaryPolicy pol{std::vector<int>(model.state_count(), kIdle), model.cap(), model.users()};
    std::vector<int> ages(model.users());
    for (std::size_t s = 0; s < model.state_count(); ++s) {
        model.decode(s, ages);
        int best = kIdle;
        int best_age = 0;
        for (std::size_t n = 0; n < ages.size(); ++n) {
            if (ages[n] > best_age) {
                best_age = ages[n];
                best = static_cast<int>(n);
            }
        }
        pol.actions[s] = best;
    }
    return pol;
}

}  // namespace

ValueTable discounted_value_iteration(const TruncatedModel& model, double discount, const SolveOptions& options) {
    check_discount(discount);
    if (!(options.tolerance > 0.0)) throw ContractError("tolerance must be positive");
    const std::size_t count = model.state_count();
    std::vector<double> v(count, 0.0), next(count, 0.0);
    std::vector<int> ages(model.users());
    for (int it = 0; it < options.max_iterations; ++it) {
        double residual = 0.0;
        for (std::size_t s = 0; s < count; ++s) {
            model.decode(s, ages);
            double best = model.q_value(v, ages, kIdle, discount);
            for (int a = 0; a < static_cast<int>(model.users()); ++a)
                if (ages[a] > 0) best = std::min(best, model.q_value(v, ages, a, discount));
            next[s] = best;
            residual = std::max(residual, std::abs(best - v[s]));
        }
        v.swap(next);
        if (residual <= options.tolerance) return {std::move(v), discount, model.cap(), model.users()};
    }
    throw std::runtime_error("discounted value iteration exceeded its iteration cap");
}

PolicyIterationResult structural_policy_iteration(const TruncatedModel& model, double discount,
                                                  const SolveOptions& options) {
    check_discount(discount);
    if (model.cap() < 2) throw ContractError("structural policy iteration needs m >= 2");
    const std::size_t count = model.state_count();
    const std::size_t n_users = model.users();
    const int cap = model.cap();

    StationaryPolicy previous = max_age_policy(model);
    std::vector<double> v(count), tmp(count);
    std::vector<int> ages(n_users);
    for (std::size_t s = 0; s < count; ++s) {
        model.decode(s, ages);
        double sum = 0.0;
        for (int a : ages) sum += a;
        v[s] = sum;
    }

    PolicyIterationResult result;
    StationaryPolicy current{std::vector<int>(count, kIdle), cap, n_users};
    std::vector<char> assigned(count);
    std::vector<int> shifted(n_users);

    for (int it = 1; it <= options.max_iterations; ++it) {
        std::fill(assigned.begin(), assigned.end(), 0);
        for (std::size_t s = 0; s < count; ++s) {
            if (assigned[s]) continue;
            model.decode(s, ages);
            const int best = greedy_action(model, v, ages, discount);
            current.actions[s] = best;
            tmp[s] = model.q_value(v, ages, best, discount);
            assigned[s] = 1;
            if (best == kIdle) continue;
            shifted = ages;
            const std::size_t stride = model.stride(static_cast<std::size_t>(best));
            std::size_t target = s;
            while (shifted[best] < cap) {
                ++shifted[best];
                target += stride;
                if (assigned[target]) continue;
                current.actions[target] = best;
                tmp[target] = model.q_value(v, shifted, best, discount);
                assigned[target] = 1;
                ++result.propagated_states;
            }
        }

        const double ref = tmp[0];
        double change = 0.0;
        for (std::size_t s = 0; s < count; ++s) {
            const double nv = tmp[s] - ref;
            change = std::max(change, std::abs(nv - v[s]));
            v[s] = nv;
        }
        result.iterations = it;
        const bool stable = current.actions == previous.actions;
        previous.actions = current.actions;
        if (stable && change <= options.tolerance) {
            result.policy = std::move(current);
            result.values = {std::move(v), discount, cap, n_users};
            return result;
        }
    }
    throw std::runtime_error("structural policy iteration did not converge");
}

PolicyIterationResult plain_policy_iteration(const TruncatedModel& model, double discount,
                                             const SolveOptions& options) {
    check_discount(discount);
    const std::size_t count = model.state_count();
    const std::size_t n_users = model.users();
    StationaryPolicy policy = max_age_policy(model);
    std::vector<int> ages(n_users);
    std::vector<double> v(count, 0.0);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(count));

    PolicyIterationResult result;
    for (int it = 1; it <= options.max_iterations; ++it) {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(count * 8);
        for (std::size_t s = 0; s < count; ++s) {
            model.decode(s, ages);
            rhs[static_cast<Eigen::Index>(s)] = model.cost(ages);
            triplets.emplace_back(s, s, 1.0);
            for (const auto& t : model.kernel(ages, policy.actions[s]))
                triplets.emplace_back(s, t.to, -discount * t.prob);
        }
        Eigen::SparseMatrix<double> system(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
        system.setFromTriplets(triplets.begin(), triplets.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(system);
        if (lu.info() != Eigen::Success) throw std::runtime_error("policy evaluation factorization failed");
        const Eigen::VectorXd solved = lu.solve(rhs);
        for (std::size_t s = 0; s < count; ++s) v[s] = solved[static_cast<Eigen::Index>(s)];

        bool changed = false;
        for (std::size_t s = 0; s < count; ++s) {
            model.decode(s, ages);
            const int cand = greedy_action(model, v, ages, discount);
            if (cand == policy.actions[s]) continue;
            const double q_cur = model.q_value(v, ages, policy.actions[s], discount);
            const double q_new = model.q_value(v, ages, cand, discount);
            if (!tie_or_worse(q_new, q_cur)) {
                policy.actions[s] = cand;
                changed = true;
            }
        }
        result.iterations = it;
        if (!changed) {
            const double ref = v[0];
            for (auto& x : v) x -= ref;
            result.policy = std::move(policy);
            result.values = {std::move(v), discount, model.cap(), n_users};
            return result;
        }
    }
    throw std::runtime_error("policy iteration did not converge");
}

std::size_t StructureReport::count(Violation::Kind kind) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; }));
}

const char* to_string(Violation::Kind kind) {
    switch (kind) {
        case Violation::Kind::monotonicity: return "monotonicity";
        case Violation::Kind::submodularity: return "submodularity";
        case Violation::Kind::persistence: return "persistence";
    }
    return "unknown";
}

StructureReport verify_structure(const TruncatedModel& model, const ValueTable& values, double tolerance) {
    if (values.values.size() != model.state_count()) throw ContractError("value table does not match the model");
    StructureReport report;
    const std::size_t n_users = model.users();
    const int cap = model.cap();
    const auto& v = values.values;
    std::vector<int> ages(n_users);

    auto describe = [](double lhs, double rhs) {
        std::ostringstream os;
        os.precision(12);
        os << lhs << " < " << rhs;
        return os.str();
    };

    for (std::size_t s = 0; s < model.state_count(); ++s) {
        model.decode(s, ages);

        for (std::size_t i = 0; i < n_users; ++i) {
            const std::size_t si = model.stride(i);
            for (int zi = 1; ages[i] + zi <= cap; ++zi) {
                ++report.monotonicity_checks;
                const double up = v[s + static_cast<std::size_t>(zi) * si];
                if (up < v[s] - tolerance)
                    report.violations.push_back({Violation::Kind::monotonicity, ages, describe(up, v[s])});
            }
            for (std::size_t j = 0; j < n_users; ++j) {
                if (j == i) continue;
                const std::size_t sj = model.stride(j);
                for (int zi = 1; ages[i] + zi <= cap; ++zi) {
                    const std::size_t raise_i = static_cast<std::size_t>(zi) * si;
                    const double gain_here = v[s + raise_i] - v[s];
                    for (int zj = 1; zj <= ages[j]; ++zj) {
                        const std::size_t lower_j = static_cast<std::size_t>(zj) * sj;
                        ++report.submodularity_checks;
                        const double gain_lower = v[s + raise_i - lower_j] - v[s - lower_j];
                        if (gain_lower < gain_here - tolerance)
                            report.violations.push_back(
                                {Violation::Kind::submodularity, ages, describe(gain_lower, gain_here)});
                        if (gain_lower > gain_here + tolerance) ++report.supermodularity_failures;
                    }
                }
            }
        }

        const int act = greedy_action(model, v, ages, values.discount);
        if (act == kIdle) continue;
        std::vector<int> shifted = ages;
        while (shifted[act] < cap) {
            ++shifted[act];
            ++report.persistence_checks;
            const int there = greedy_action(model, v, shifted, values.discount);
            if (there == act) continue;
            const double q_act = model.q_value(v, shifted, act, values.discount);
            const double q_best = model.q_value(v, shifted, there, values.discount);
            if (q_act > q_best + tolerance)
                report.violations.push_back({Violation::Kind::persistence, shifted, describe(q_best, q_act)});
        }
    }
    return report;
}

void write_policy_csv(std::ostream& out, const TruncatedModel& model, const StationaryPolicy& policy) {
    for (std::size_t n = 0; n < model.users(); ++n) out << 'x' << n << ',';
    out << "action\n";
    std::vector<int> ages(model.users());
    for (std::size_t s = 0; s < model.state_count(); ++s) {
        model.decode(s, ages);
        for (int a : ages) out << a << ',';
        out << policy.actions[s] << '\n';
    }
}

void write_policy_binary(std::ostream& out, const StationaryPolicy& policy) {
    out.write("AOSPOL1", 8);
    const auto users = static_cast<std::uint32_t>(policy.users);
    const auto cap = static_cast<std::uint32_t>(policy.cap);
    out.write(reinterpret_cast<const char*>(&users), sizeof users);
    out.write(reinterpret_cast<const char*>(&cap), sizeof cap);
    for (int a : policy.actions) {
        const auto v = static_cast<std::int32_t>(a);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

}  // namespace aos::mdp
