#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <tuple>
#include <vector>

#include "perpetua/discrete_law.hpp"
#include "perpetua/error.hpp"
#include "perpetua/model.hpp"

namespace perpetua {

struct OracleLimits {
    std::size_t horizon = 20;
    std::size_t atom_cap = 10'000'000;
    double merge_tol = kMergeTol;
};

// One path M_0..M_n with its coefficient choices.
struct PathAtom {
    std::vector<std::size_t> states;
    std::vector<std::size_t> coeff_choices;
    double prob = 1.0;
    double pi_n = 1.0;
    double s_n = 0.0;
    double backward_value = 0.0;
    double forward_value = 0.0;
};

// One excursion atom: (tau(i), A^i, B^i, W^i) with its probability.
struct ExcursionAtom {
    std::size_t tau = 0;
    double a = 1.0;
    double b = 0.0;
    double w = 0.0;
    double mass = 0.0;
};

struct ExcursionLaw {
    std::vector<ExcursionAtom> atoms;
    double tail_mass = 0.0;

    double enumerated_mass() const {
        double s = 0.0;
        for (const auto& x : atoms) s += x.mass;
        return s;
    }

    DiscreteLaw law_of(const std::function<double(const ExcursionAtom&)>& f, double tol = kMergeTol) const {
        std::vector<Atom> out;
        out.reserve(atoms.size());
        for (const auto& x : atoms) out.push_back({f(x), x.mass});
        return DiscreteLaw::from_atoms(std::move(out), tol, tail_mass);
    }
};

namespace detail {

inline void check_horizon(std::size_t n, const OracleLimits& limits) {
    if (n > limits.horizon)
        throw Error(ErrorCode::ExplosionCap, "n = " + std::to_string(n) + " exceeds the enumeration horizon " +
                                                 std::to_string(limits.horizon));
}

inline void check_cap(std::size_t count, const OracleLimits& limits) {
    if (count > limits.atom_cap)
        throw Error(ErrorCode::ExplosionCap, "atom count " + std::to_string(count) + " exceeds the cap " +
                                                 std::to_string(limits.atom_cap) + "; use simulation instead");
}

struct BackAtom {
    double pi;
    double sum;
    double mass;
};

inline void merge_back_atoms(std::vector<BackAtom>& atoms, double tol) {
    std::sort(atoms.begin(), atoms.end(), [](const BackAtom& x, const BackAtom& y) {
        return std::tie(x.pi, x.sum) < std::tie(y.pi, y.sum);
    });
    std::vector<BackAtom> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) {
        if (!out.empty() && values_close(out.back().pi, a.pi, tol) && values_close(out.back().sum, a.sum, tol))
            out.back().mass += a.mass;
        else
            out.push_back(a);
    }
    atoms = std::move(out);
}

// Joint law of (Pi_n, sum_{k<=n} Pi_{k-1} B_k) under P_start.
inline std::vector<BackAtom> backward_pairs(const Model& model, std::size_t start, std::size_t n, const OracleLimits& limits) {
    const std::size_t S = model.size();
    std::vector<std::vector<BackAtom>> cur(S), next(S);
    cur[start].push_back({1.0, 0.0, 1.0});
    for (std::size_t step = 0; step < n; ++step) {
        for (auto& v : next) v.clear();
        std::size_t count = 0;
        for (std::size_t s = 0; s < S; ++s)
            for (const auto& x : cur[s])
                for (std::size_t t : model.successors(s)) {
                    const double p = model.p(s, t);
                    for (const auto& c : model.edge(s, t)) next[t].push_back({x.pi * c.a, x.sum + x.pi * c.b, x.mass * p * c.w});
                }
        for (auto& v : next) {
            merge_back_atoms(v, limits.merge_tol);
            count += v.size();
        }
        check_cap(count, limits);
        std::swap(cur, next);
    }
    std::vector<BackAtom> all;
    for (auto& v : cur) all.insert(all.end(), v.begin(), v.end());
    merge_back_atoms(all, limits.merge_tol);
    return all;
}

} // namespace detail

// Exact law of Psi_{1:n}(Z_0) under P_start.
inline DiscreteLaw enumerate_backward(const Model& model, std::size_t start, std::size_t n, const InitialLaw& z0,
                                      const OracleLimits& limits = {}) {
    detail::check_horizon(n, limits);
    const auto pairs = detail::backward_pairs(model, start, n, limits);
    const auto& zlaw = z0.at(start);
    detail::check_cap(pairs.size() * zlaw.size(), limits);
    std::vector<Atom> out;
    out.reserve(pairs.size() * zlaw.size());
    for (const auto& x : pairs)
        for (const auto& z : zlaw.atoms()) out.push_back({x.pi * z.v + x.sum, x.mass * z.m});
    return DiscreteLaw::from_atoms(std::move(out), limits.merge_tol);
}

// Exact law of Psi_{n:1}(Z_0) under P_start.
inline DiscreteLaw enumerate_forward(const Model& model, std::size_t start, std::size_t n, const InitialLaw& z0,
                                     const OracleLimits& limits = {}) {
    detail::check_horizon(n, limits);
    const std::size_t S = model.size();
    std::vector<DiscreteLaw> cur(S);
    cur[start] = z0.at(start);
    for (std::size_t step = 0; step < n; ++step) {
        std::vector<std::vector<Atom>> next(S);
        std::size_t count = 0;
        for (std::size_t s = 0; s < S; ++s)
            for (const auto& x : cur[s].atoms())
                for (std::size_t t : model.successors(s)) {
                    const double p = model.p(s, t);
                    for (const auto& c : model.edge(s, t)) next[t].push_back({c.a * x.v + c.b, x.m * p * c.w});
                }
        for (std::size_t t = 0; t < S; ++t) {
            cur[t] = DiscreteLaw::from_atoms(std::move(next[t]), limits.merge_tol);
            count += cur[t].size();
        }
        detail::check_cap(count, limits);
    }
    std::vector<std::pair<double, DiscreteLaw>> parts;
    for (auto& law : cur)
        if (!law.empty()) parts.emplace_back(1.0, std::move(law));
    return DiscreteLaw::mixture(parts, limits.merge_tol);
}

// The same laws with M_0 drawn from pi.
inline DiscreteLaw enumerate_backward_stationary(const Model& model, std::size_t n, const InitialLaw& z0,
                                                 const OracleLimits& limits = {}) {
    std::vector<std::pair<double, DiscreteLaw>> parts;
    for (std::size_t i = 0; i < model.size(); ++i) parts.emplace_back(model.pi()[i], enumerate_backward(model, i, n, z0, limits));
    return DiscreteLaw::mixture(parts, limits.merge_tol);
}

inline DiscreteLaw enumerate_forward_stationary(const Model& model, std::size_t n, const InitialLaw& z0,
                                                const OracleLimits& limits = {}) {
    std::vector<std::pair<double, DiscreteLaw>> parts;
    for (std::size_t i = 0; i < model.size(); ++i) parts.emplace_back(model.pi()[i], enumerate_forward(model, i, n, z0, limits));
    return DiscreteLaw::mixture(parts, limits.merge_tol);
}

// Depth-first walk over every path of length n from start; the visitor sees
// each complete path with Z_0 = z.
inline void for_each_path(const Model& model, std::size_t start, std::size_t n, double z,
                          const std::function<void(const PathAtom&)>& visit, const OracleLimits& limits = {}) {
    detail::check_horizon(n, limits);
    PathAtom path;
    path.states.push_back(start);
    path.backward_value = z;
    path.forward_value = z;
    double sum = 0.0;
    std::size_t visited = 0;
    std::function<void(std::size_t)> rec = [&](std::size_t depth) {
        if (depth == n) {
            path.backward_value = path.pi_n * z + sum;
            visit(path);
            detail::check_cap(++visited, limits);
            return;
        }
        const std::size_t s = path.states.back();
        for (std::size_t t : model.successors(s)) {
            const auto& law = model.edge(s, t);
            for (std::size_t k = 0; k < law.size(); ++k) {
                const auto saved = std::make_tuple(path.prob, path.pi_n, path.s_n, path.forward_value, sum);
                const auto& c = law[k];
                path.states.push_back(t);
                path.coeff_choices.push_back(k);
                path.prob *= model.p(s, t) * c.w;
                sum += path.pi_n * c.b;
                path.pi_n *= c.a;
                path.s_n -= std::log(std::abs(c.a));
                path.forward_value = c.a * path.forward_value + c.b;
                rec(depth + 1);
                path.states.pop_back();
                path.coeff_choices.pop_back();
                std::tie(path.prob, path.pi_n, path.s_n, path.forward_value, sum) = saved;
            }
        }
    };
    rec(0);
}

inline std::vector<PathAtom> enumerate_paths(const Model& model, std::size_t start, std::size_t n, double z,
                                             const OracleLimits& limits = {}) {
    std::vector<PathAtom> out;
    for_each_path(model, start, n, z, [&](const PathAtom& p) { out.push_back(p); }, limits);
    return out;
}

// Joint law of the first excursion from i, enumerated up to horizon steps.
inline ExcursionLaw excursion_law(const Model& model, std::size_t i, std::size_t horizon, const OracleLimits& limits = {}) {
    if (horizon < 1) throw Error(ErrorCode::BadShape, "excursion horizon must be at least 1");
    struct Open {
        double pi, sum, w, mass;
    };
    const std::size_t S = model.size();
    std::vector<std::vector<Open>> cur(S), next(S);
    cur[i].push_back({1.0, 0.0, 0.0, 1.0});
    ExcursionLaw law;
    const auto key = [](const Open& x) { return std::tie(x.pi, x.sum, x.w); };
    for (std::size_t step = 1; step <= horizon; ++step) {
        for (auto& v : next) v.clear();
        std::vector<ExcursionAtom> done;
        for (std::size_t s = 0; s < S; ++s)
            for (const auto& x : cur[s])
                for (std::size_t t : model.successors(s)) {
                    const double p = model.p(s, t);
                    for (const auto& c : model.edge(s, t)) {
                        const double term = x.pi * c.b;
                        Open y{x.pi * c.a, x.sum + term, std::max(x.w, std::abs(term)), x.mass * p * c.w};
                        if (t == i) done.push_back({step, y.pi, y.sum, y.w, y.mass});
                        else next[t].push_back(y);
                    }
                }
        std::sort(done.begin(), done.end(), [](const ExcursionAtom& x, const ExcursionAtom& y) {
            return std::tie(x.a, x.b, x.w) < std::tie(y.a, y.b, y.w);
        });
        for (const auto& d : done) {
            auto& out = law.atoms;
            if (!out.empty() && out.back().tau == d.tau && values_close(out.back().a, d.a, limits.merge_tol) &&
                values_close(out.back().b, d.b, limits.merge_tol) && values_close(out.back().w, d.w, limits.merge_tol))
                out.back().mass += d.mass;
            else
                out.push_back(d);
        }
        std::size_t count = law.atoms.size();
        for (auto& v : next) {
            std::sort(v.begin(), v.end(), [&](const Open& x, const Open& y) { return key(x) < key(y); });
            std::vector<Open> merged;
            for (const auto& x : v) {
                if (!merged.empty() && values_close(merged.back().pi, x.pi, limits.merge_tol) &&
                    values_close(merged.back().sum, x.sum, limits.merge_tol) &&
                    values_close(merged.back().w, x.w, limits.merge_tol))
                    merged.back().mass += x.mass;
                else
                    merged.push_back(x);
            }
            v = std::move(merged);
            count += v.size();
        }
        detail::check_cap(count, limits);
        std::swap(cur, next);
    }
    for (const auto& v : cur)
        for (const auto& x : v) law.tail_mass += x.mass;
    return law;
}

} // namespace perpetua
