#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "perpetua/model.hpp"

namespace perpetua {

inline constexpr double kDegeneracyTol = 1e-10;

// g with -log|a| = g(j) - g(i) on every edge atom, the optional sign
// sequence sigma with sign(a) = sigma_i sigma_j, and a_i = exp(g(i)).
struct HomologyWitness {
    std::vector<double> g;
    std::optional<std::vector<int>> sigma;
    std::vector<double> a;
};

struct CycleViolation {
    std::vector<std::size_t> cycle;  // closed walk, first state repeated at the end
    double abs_product = 0.0;
    std::string reason;
};

struct NullHomologyResult {
    bool null_homologous = false;
    HomologyWitness witness;
    std::optional<CycleViolation> violation;
};

// E_pi log|A|; minus infinity when some atom has a = 0.
inline double stationary_log_drift(const Model& model) {
    double s = 0.0;
    for (const auto& [i, j] : model.edge_list()) {
        const double weight = model.pi()[i] * model.p(i, j);
        for (const auto& c : model.edge(i, j)) {
            if (c.a == 0.0) return -std::numeric_limits<double>::infinity();
            s += weight * c.w * std::log(std::abs(c.a));
        }
    }
    return s;
}

namespace detail {

// Shortest directed path from -> to (inclusive of both ends).
inline std::vector<std::size_t> shortest_path(const Model& model, std::size_t from, std::size_t to) {
    const std::size_t n = model.size();
    std::vector<long> parent(n, -1);
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> queue{from};
    seen[from] = true;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        if (u == to) break;
        for (std::size_t v : model.successors(u))
            if (!seen[v]) {
                seen[v] = true;
                parent[v] = static_cast<long>(u);
                queue.push_back(v);
            }
    }
    std::vector<std::size_t> path{to};
    while (path.back() != from) path.push_back(static_cast<std::size_t>(parent[path.back()]));
    std::reverse(path.begin(), path.end());
    return path;
}

// Breadth-first spanning tree rooted at state 0: parent state of each node.
inline std::vector<long> bfs_tree(const Model& model) {
    const std::size_t n = model.size();
    std::vector<long> parent(n, -2);
    parent[0] = -1;
    std::deque<std::size_t> queue{0};
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v : model.successors(u))
            if (parent[v] == -2) {
                parent[v] = static_cast<long>(u);
                queue.push_back(v);
            }
    }
    return parent;
}

inline std::vector<std::size_t> bfs_order(const Model& model) {
    std::vector<std::size_t> order{0};
    std::vector<bool> seen(model.size(), false);
    seen[0] = true;
    for (std::size_t k = 0; k < order.size(); ++k)
        for (std::size_t v : model.successors(order[k]))
            if (!seen[v]) {
                seen[v] = true;
                order.push_back(v);
            }
    return order;
}

inline double abs_cycle_product(const Model& model, const std::vector<std::size_t>& cycle) {
    double log_sum = 0.0;
    for (std::size_t k = 0; k + 1 < cycle.size(); ++k)
        log_sum += std::log(std::abs(model.edge(cycle[k], cycle[k + 1]).front().a));
    return std::exp(log_sum);
}

inline bool near(double x, double y, double tol) {
    return std::abs(x - y) <= tol * std::max({1.0, std::abs(x), std::abs(y)});
}

} // namespace detail

// Exact test of -log|A_n| = g(M_n) - g(M_{n-1}) a.s.
inline NullHomologyResult null_homology(const Model& model, double tol = kDegeneracyTol) {
    NullHomologyResult result;
    const std::size_t n = model.size();
    for (const auto& [i, j] : model.edge_list()) {
        const auto& law = model.edge(i, j);
        const double first = std::abs(law.front().a);
        bool point_mass = first > 0.0;
        for (const auto& c : law) point_mass = point_mass && c.a != 0.0 && detail::near(std::log(std::abs(c.a)), std::log(first), tol);
        if (!point_mass) {
            CycleViolation v;
            v.cycle = detail::shortest_path(model, j, i);
            v.cycle.insert(v.cycle.begin(), i);
            v.abs_product = std::numeric_limits<double>::quiet_NaN();
            v.reason = "|a| on edge (" + model.label(i) + "," + model.label(j) + ") is not a point mass";
            result.violation = std::move(v);
            return result;
        }
    }

    const auto parent = detail::bfs_tree(model);
    const auto order = detail::bfs_order(model);
    std::vector<double> g(n, 0.0);
    for (std::size_t k = 1; k < order.size(); ++k) {
        const std::size_t v = order[k];
        const std::size_t u = static_cast<std::size_t>(parent[v]);
        g[v] = g[u] - std::log(std::abs(model.edge(u, v).front().a));
    }
    for (const auto& [i, j] : model.edge_list()) {
        const double x = -std::log(std::abs(model.edge(i, j).front().a));
        if (!detail::near(x, g[j] - g[i], tol)) {
            CycleViolation v;
            v.cycle = detail::shortest_path(model, j, i);
            v.cycle.insert(v.cycle.begin(), i);
            v.abs_product = detail::abs_cycle_product(model, v.cycle);
            v.reason = "cycle through edge (" + model.label(i) + "," + model.label(j) + ") has |product| != 1";
            result.violation = std::move(v);
            return result;
        }
    }
    result.null_homologous = true;
    result.witness.g = g;
    result.witness.a.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.witness.a[i] = std::exp(g[i]);

    std::vector<int> sigma(n, 0);
    sigma[0] = 1;
    bool sign_ok = true;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const std::size_t v = order[k];
        const std::size_t u = static_cast<std::size_t>(parent[v]);
        sigma[v] = sigma[u] * (model.edge(u, v).front().a > 0.0 ? 1 : -1);
    }
    for (const auto& [i, j] : model.edge_list())
        for (const auto& c : model.edge(i, j))
            if ((c.a > 0.0 ? 1 : -1) != sigma[i] * sigma[j]) sign_ok = false;
    if (sign_ok) result.witness.sigma = sigma;
    return result;
}

// True when a_ij = h_i / h_j on every edge atom, i.e. A^i = 1 a.s. for all i.
inline bool unit_excursion_products(const Model& model, double tol = kDegeneracyTol) {
    const auto nh = null_homology(model, tol);
    return nh.null_homologous && nh.witness.sigma.has_value();
}

} // namespace perpetua
