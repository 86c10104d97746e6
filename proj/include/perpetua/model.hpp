#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "perpetua/discrete_law.hpp"
#include "perpetua/error.hpp"

namespace perpetua {

inline constexpr double kRowSumTol = 1e-12;

// One atom of an edge law: (A, B) = (a, b) with probability w.
struct CoefAtom {
    double w = 1.0;
    double a = 1.0;
    double b = 0.0;
};

struct EdgeLaw {
    std::vector<CoefAtom> atoms;
};

// Unvalidated model description, as read from a file or built in code.
struct ModelSpec {
    std::vector<std::string> labels;
    std::vector<double> transition;  // row-major, size n*n
    std::map<std::pair<std::size_t, std::size_t>, EdgeLaw> edges;

    ModelSpec() = default;
    explicit ModelSpec(std::size_t n) : transition(n * n, 0.0) {
        for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
    }

    std::size_t size() const { return labels.size(); }

    ModelSpec& set_p(std::size_t i, std::size_t j, double p) {
        transition[i * size() + j] = p;
        return *this;
    }

    ModelSpec& add_atom(std::size_t i, std::size_t j, double w, double a, double b) {
        edges[{i, j}].atoms.push_back({w, a, b});
        return *this;
    }

    // Sets p_ij and a point-mass edge law in one call.
    ModelSpec& edge(std::size_t i, std::size_t j, double p, double a, double b) {
        set_p(i, j, p);
        edges[{i, j}].atoms = {{1.0, a, b}};
        return *this;
    }
};

namespace detail {

inline std::vector<std::vector<std::size_t>> adjacency(const std::vector<double>& P, std::size_t n, bool reverse) {
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (P[i * n + j] > 0.0) {
                if (reverse) adj[j].push_back(i);
                else adj[i].push_back(j);
            }
    return adj;
}

inline std::vector<long> bfs_levels(const std::vector<std::vector<std::size_t>>& adj, std::size_t root) {
    std::vector<long> level(adj.size(), -1);
    std::deque<std::size_t> queue{root};
    level[root] = 0;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v : adj[u])
            if (level[v] < 0) {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
    }
    return level;
}

// Period of an irreducible chain: gcd of level(i) + 1 - level(j) over edges.
inline long chain_period(const std::vector<std::vector<std::size_t>>& adj) {
    const auto level = bfs_levels(adj, 0);
    long g = 0;
    for (std::size_t i = 0; i < adj.size(); ++i)
        for (std::size_t j : adj[i]) g = std::gcd(g, std::labs(level[i] + 1 - level[j]));
    return g;
}

inline std::vector<double> solve_stationary(const std::vector<double>& P, std::size_t n) {
    Eigen::MatrixXd M(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) M(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = P[i * n + j];
    M -= Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    M.row(static_cast<Eigen::Index>(n) - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    rhs(static_cast<Eigen::Index>(n) - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.rank() < static_cast<Eigen::Index>(n))
        throw Error(ErrorCode::SingularSystem, "stationary equations are rank deficient");
    const Eigen::VectorXd x = lu.solve(rhs);
    std::vector<double> pi(n);
    for (std::size_t i = 0; i < n; ++i) pi[i] = x(static_cast<Eigen::Index>(i));
    return pi;
}

} // namespace detail

// Every violation of the model assumptions found in spec.
inline std::vector<Issue> collect_issues(const ModelSpec& spec, double row_tol = kRowSumTol) {
    std::vector<Issue> issues;
    const std::size_t n = spec.size();
    if (n == 0) {
        issues.push_back({ErrorCode::BadShape, "model has no states"});
        return issues;
    }
    if (spec.transition.size() != n * n) {
        issues.push_back({ErrorCode::BadShape, "transition matrix must have " + std::to_string(n * n) + " entries"});
        return issues;
    }
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < n; ++i)
        if (!seen.emplace(spec.labels[i], i).second)
            issues.push_back({ErrorCode::DuplicateLabel, "label '" + spec.labels[i] + "' repeated"});

    bool rows_ok = true;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double p = spec.transition[i * n + j];
            if (!(p >= 0.0 && p <= 1.0)) {
                issues.push_back({ErrorCode::RowSumError, "p(" + spec.labels[i] + "," + spec.labels[j] + ") is not a probability"});
                rows_ok = false;
            }
            s += p;
        }
        if (std::abs(s - 1.0) > row_tol) {
            issues.push_back({ErrorCode::RowSumError, "row " + spec.labels[i] + " sums to " + std::to_string(s)});
            rows_ok = false;
        }
    }

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double p = spec.transition[i * n + j];
            const auto it = spec.edges.find({i, j});
            const std::string name = "(" + spec.labels[i] + "," + spec.labels[j] + ")";
            if (p > 0.0 && (it == spec.edges.end() || it->second.atoms.empty())) {
                issues.push_back({ErrorCode::MissingEdgeLaw, "edge " + name + " has positive probability but no law"});
                continue;
            }
            if (it == spec.edges.end()) continue;
            if (!(p > 0.0)) {
                issues.push_back({ErrorCode::ExtraEdgeLaw, "edge " + name + " has a law but zero probability"});
                continue;
            }
            double s = 0.0;
            for (const auto& atom : it->second.atoms) {
                if (!(atom.w > 0.0)) issues.push_back({ErrorCode::BadWeights, "edge " + name + " has a non-positive weight"});
                if (!std::isfinite(atom.a) || !std::isfinite(atom.b))
                    issues.push_back({ErrorCode::BadWeights, "edge " + name + " has a non-finite coefficient"});
                s += atom.w;
            }
            if (std::abs(s - 1.0) > row_tol)
                issues.push_back({ErrorCode::BadWeights, "edge " + name + " weights sum to " + std::to_string(s)});
        }
    for (const auto& [key, law] : spec.edges)
        if (key.first >= n || key.second >= n)
            issues.push_back({ErrorCode::BadShape, "edge law refers to a state outside the model"});

    if (!rows_ok) return issues;
    const auto fwd = detail::adjacency(spec.transition, n, false);
    const auto bwd = detail::adjacency(spec.transition, n, true);
    const auto reach = detail::bfs_levels(fwd, 0);
    const auto coreach = detail::bfs_levels(bwd, 0);
    bool irreducible = true;
    for (std::size_t i = 0; i < n; ++i)
        if (reach[i] < 0 || coreach[i] < 0) {
            issues.push_back({ErrorCode::NotIrreducible, "state " + spec.labels[i] + " does not communicate with state " + spec.labels[0]});
            irreducible = false;
        }
    if (irreducible) {
        const long period = detail::chain_period(fwd);
        if (period != 1) issues.push_back({ErrorCode::NotAperiodic, "chain has period " + std::to_string(period)});
    }
    return issues;
}

// A validated, immutable Markov-modulated affine system.
class Model {
public:
    static Model validate(ModelSpec spec, double row_tol = kRowSumTol, double merge_tol = kMergeTol) {
        auto issues = collect_issues(spec, row_tol);
        if (!issues.empty()) throw ModelError(std::move(issues));
        return Model(std::move(spec), merge_tol);
    }

    std::size_t size() const noexcept { return labels_.size(); }
    const std::string& label(std::size_t i) const { return labels_[i]; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    std::optional<std::size_t> index_of(const std::string& label) const {
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == label) return i;
        return std::nullopt;
    }

    double p(std::size_t i, std::size_t j) const { return transition_[i * size() + j]; }
    const std::vector<double>& transition() const noexcept { return transition_; }

    // Edge law of (i, j); empty when p_ij = 0.
    const std::vector<CoefAtom>& edge(std::size_t i, std::size_t j) const { return edges_[i * size() + j]; }

    const std::vector<std::size_t>& successors(std::size_t i) const { return succ_[i]; }
    const std::vector<std::pair<std::size_t, std::size_t>>& edge_list() const noexcept { return edge_list_; }

    const std::vector<double>& pi() const noexcept { return pi_; }

    ModelSpec to_spec() const {
        ModelSpec spec;
        spec.labels = labels_;
        spec.transition = transition_;
        for (const auto& [i, j] : edge_list_) spec.edges[{i, j}].atoms = edge(i, j);
        return spec;
    }

private:
    Model(ModelSpec spec, double merge_tol) : labels_(std::move(spec.labels)), transition_(std::move(spec.transition)) {
        const std::size_t n = labels_.size();
        edges_.resize(n * n);
        succ_.resize(n);
        for (auto& [key, law] : spec.edges) {
            auto atoms = merge_atoms(std::move(law.atoms), merge_tol);
            edges_[key.first * n + key.second] = std::move(atoms);
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (transition_[i * n + j] > 0.0) {
                    succ_[i].push_back(j);
                    edge_list_.emplace_back(i, j);
                }
        pi_ = detail::solve_stationary(transition_, n);
    }

    static std::vector<CoefAtom> merge_atoms(std::vector<CoefAtom> atoms, double tol) {
        std::vector<CoefAtom> out;
        for (const auto& atom : atoms) {
            bool merged = false;
            for (auto& kept : out)
                if (values_close(kept.a, atom.a, tol) && values_close(kept.b, atom.b, tol)) {
                    kept.w += atom.w;
                    merged = true;
                    break;
                }
            if (!merged) out.push_back(atom);
        }
        return out;
    }

    std::vector<std::string> labels_;
    std::vector<double> transition_;
    std::vector<std::vector<CoefAtom>> edges_;
    std::vector<std::vector<std::size_t>> succ_;
    std::vector<std::pair<std::size_t, std::size_t>> edge_list_;
    std::vector<double> pi_;
};

inline std::vector<double> stationary_distribution(const Model& model) {
    return detail::solve_stationary(model.transition(), model.size());
}

// Time reversal: #p_ij = pi_j p_ji / pi_i with #K_ij = K_ji.
inline Model dual(const Model& model) {
    const std::size_t n = model.size();
    const auto& pi = model.pi();
    ModelSpec spec;
    spec.labels = model.labels();
    spec.transition.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double q = pi[j] * model.p(j, i) / pi[i];
            spec.transition[i * n + j] = q;
            s += q;
        }
        for (std::size_t j = 0; j < n; ++j) spec.transition[i * n + j] /= s;
    }
    for (const auto& [i, j] : model.edge_list()) spec.edges[{j, i}].atoms = model.edge(i, j);
    return Model::validate(std::move(spec), 1e-9);
}

struct StandingAssumptionReport {
    bool a_never_zero = true;
    bool b_not_identically_zero = true;
    double prob_a_zero = 0.0;
    double prob_b_zero = 0.0;

    bool holds() const noexcept { return a_never_zero && b_not_identically_zero; }
};

inline StandingAssumptionReport check_standing_assumption(const Model& model) {
    StandingAssumptionReport r;
    bool some_b_nonzero = false;
    for (const auto& [i, j] : model.edge_list()) {
        const double weight = model.pi()[i] * model.p(i, j);
        for (const auto& atom : model.edge(i, j)) {
            if (atom.a == 0.0) r.prob_a_zero += weight * atom.w;
            if (atom.b == 0.0) r.prob_b_zero += weight * atom.w;
            else some_b_nonzero = true;
        }
    }
    r.a_never_zero = r.prob_a_zero == 0.0;
    r.b_not_identically_zero = some_b_nonzero;
    if (!some_b_nonzero) r.prob_b_zero = 1.0;
    return r;
}

// Law of Z_0 given M_0 = i.
struct InitialLaw {
    std::vector<DiscreteLaw> per_state;

    static InitialLaw constant(const DiscreteLaw& law, std::size_t n) { return {std::vector<DiscreteLaw>(n, law)}; }
    static InitialLaw point(double z, std::size_t n) { return constant(DiscreteLaw::point(z), n); }

    const DiscreteLaw& at(std::size_t i) const { return per_state.size() == 1 ? per_state[0] : per_state.at(i); }

    bool state_independent() const {
        for (const auto& law : per_state)
            if (!(law == per_state.front())) return false;
        return true;
    }
};

} // namespace perpetua
