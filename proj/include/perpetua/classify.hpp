#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "perpetua/discrete_law.hpp"
#include "perpetua/error.hpp"
#include "perpetua/homology.hpp"
#include "perpetua/model.hpp"
#include "perpetua/oracle.hpp"
#include "perpetua/simulate.hpp"

namespace perpetua {

enum class MrwTag { T1, T2, T3 };
enum class EmbeddedTag { T1p, T2p, T3p };

inline std::string to_string(MrwTag t) {
    switch (t) {
    case MrwTag::T1: return "T1";
    case MrwTag::T2: return "T2";
    case MrwTag::T3: return "T3";
    }
    return "?";
}

inline std::string to_string(EmbeddedTag t) {
    switch (t) {
    case EmbeddedTag::T1p: return "T1p";
    case EmbeddedTag::T2p: return "T2p";
    case EmbeddedTag::T3p: return "T3p";
    }
    return "?";
}

struct TrichotomyEvidence {
    double log_drift = 0.0;  // E_pi log|A|
    bool null_homologous = false;
    std::string basis;
};

struct EmbeddedTrichotomy {
    EmbeddedTag tag = EmbeddedTag::T1p;
    TrichotomyEvidence evidence;
};

struct MrwTrichotomy {
    MrwTag tag = MrwTag::T1;
    TrichotomyEvidence evidence;
};

// Embedded walk S_{tau_n(i)}. The tag does not depend on i.
inline EmbeddedTrichotomy embedded_trichotomy(const Model& model, std::size_t i = 0, double tol = kDegeneracyTol) {
    if (i >= model.size()) throw Error(ErrorCode::BadShape, "state index out of range");
    EmbeddedTrichotomy out;
    out.evidence.null_homologous = null_homology(model, tol).null_homologous;
    out.evidence.log_drift = out.evidence.null_homologous ? 0.0 : stationary_log_drift(model);
    if (out.evidence.null_homologous) {
        out.tag = EmbeddedTag::T2p;
        out.evidence.basis = "null-homologous: |Pi| = 1 at every return";
    } else if (out.evidence.log_drift < -tol) {
        out.tag = EmbeddedTag::T1p;
        out.evidence.basis = "E_pi log|A| < 0";
    } else {
        out.tag = EmbeddedTag::T3p;
        out.evidence.basis = std::abs(out.evidence.log_drift) <= tol ? "E_pi log|A| = 0 without null-homology (oscillating)"
                                                                      : "E_pi log|A| > 0";
    }
    return out;
}

// For a finite chain with bounded atoms the within-excursion fluctuations are
// tight, so the full walk has the same type as the embedded one.
inline MrwTrichotomy mrw_trichotomy(const Model& model, double tol = kDegeneracyTol) {
    const auto emb = embedded_trichotomy(model, 0, tol);
    MrwTrichotomy out;
    out.evidence = emb.evidence;
    out.evidence.basis += "; finite state space: T1<=>T1p, T2<=>T2p, T3<=>T3p";
    switch (emb.tag) {
    case EmbeddedTag::T1p: out.tag = MrwTag::T1; break;
    case EmbeddedTag::T2p: out.tag = MrwTag::T2; break;
    case EmbeddedTag::T3p: out.tag = MrwTag::T3; break;
    }
    return out;
}

// Supremum of S_tau(i) over all excursions from i (+inf when a positive cycle
// avoiding i exists).
inline double excursion_log_sup(const Model& model, std::size_t i) {
    const std::size_t n = model.size();
    const double inf = std::numeric_limits<double>::infinity();
    auto x = [&](std::size_t u, std::size_t v) {
        double best = -inf;
        for (const auto& c : model.edge(u, v)) best = std::max(best, c.a == 0.0 ? inf : -std::log(std::abs(c.a)));
        return best;
    };
    std::vector<double> dist(n, -inf);
    double sup = -inf;
    for (std::size_t j : model.successors(i)) {
        if (j == i) sup = std::max(sup, x(i, i));
        else dist[j] = std::max(dist[j], x(i, j));
    }
    bool relaxed = true;
    for (std::size_t round = 0; round < n + 1 && relaxed; ++round) {
        relaxed = false;
        for (std::size_t u = 0; u < n; ++u) {
            if (u == i || dist[u] == -inf) continue;
            for (std::size_t v : model.successors(u)) {
                if (v == i) continue;
                const double cand = dist[u] + x(u, v);
                if (cand > dist[v] + 1e-12) {
                    dist[v] = cand;
                    relaxed = true;
                }
            }
        }
        if (relaxed && round == n) return inf;
    }
    for (std::size_t u = 0; u < n; ++u)
        if (u != i && dist[u] > -inf && model.p(u, i) > 0.0) sup = std::max(sup, dist[u] + x(u, i));
    return sup;
}

// Law of S_tau(i) = -log|A^i| from excursions of length <= horizon.
inline DiscreteLaw return_log_law(const Model& model, std::size_t i, std::size_t horizon, const OracleLimits& limits = {}) {
    const std::size_t n = model.size();
    std::vector<std::vector<Atom>> cur(n);
    cur[i].push_back({0.0, 1.0});
    std::vector<Atom> done;
    for (std::size_t step = 1; step <= horizon; ++step) {
        std::vector<std::vector<Atom>> next(n);
        for (std::size_t s = 0; s < n; ++s)
            for (const auto& a : cur[s])
                for (std::size_t t : model.successors(s))
                    for (const auto& c : model.edge(s, t)) {
                        const double x = c.a == 0.0 ? std::numeric_limits<double>::infinity() : -std::log(std::abs(c.a));
                        Atom y{a.v + x, a.m * model.p(s, t) * c.w};
                        if (t == i) done.push_back(y);
                        else next[t].push_back(y);
                    }
        std::size_t count = 0;
        for (std::size_t t = 0; t < n; ++t) {
            cur[t] = DiscreteLaw::from_atoms(std::move(next[t]), limits.merge_tol).atoms();
            count += cur[t].size();
        }
        detail::check_cap(count, limits);
    }
    double tail = 0.0;
    for (const auto& v : cur)
        for (const auto& a : v) tail += a.m;
    return DiscreteLaw::from_atoms(std::move(done), limits.merge_tol, tail);
}

// J_i(x) = x / E_i(S^+ ∧ x) when P_i(S_tau > 0) > 0, otherwise x; J_i(0) = 1.
struct JFunction {
    enum class Mode { IdentityOnPositives, Ratio };
    Mode mode = Mode::IdentityOnPositives;
    DiscreteLaw s_tau;  // exact atoms (possibly truncated) or empirical law
    bool exact = true;

    double operator()(double x) const {
        if (x <= 0.0) return 1.0;
        if (mode == Mode::IdentityOnPositives) return x;
        double num = 0.0, mass = 0.0;
        for (const auto& a : s_tau.atoms()) {
            num += a.m * std::min(std::max(a.v, 0.0), x);
            mass += a.m;
        }
        const double expectation = num / mass;
        return expectation > 0.0 ? x / expectation : x;
    }
};

inline JFunction j_function(const Model& model, std::size_t i, std::size_t horizon = 40) {
    JFunction j;
    j.mode = excursion_log_sup(model, i) > 1e-12 ? JFunction::Mode::Ratio : JFunction::Mode::IdentityOnPositives;
    j.s_tau = return_log_law(model, i, horizon);
    j.exact = true;
    return j;
}

inline JFunction j_function(const ExcursionBatch& batch) {
    JFunction j;
    std::vector<double> s;
    s.reserve(batch.samples.size());
    bool positive = false;
    for (const auto& x : batch.samples) {
        s.push_back(x.s_tau);
        positive = positive || x.s_tau > 1e-12;
    }
    j.mode = positive ? JFunction::Mode::Ratio : JFunction::Mode::IdentityOnPositives;
    j.s_tau = DiscreteLaw::from_samples(s);
    j.exact = false;
    return j;
}

inline double j_function(const Model& model, std::size_t i, double x) { return j_function(model, i)(x); }

enum class JTarget { W, B };

struct JMomentReport {
    bool finite = true;
    std::string basis;
    double estimate = 0.0;  // E_i J_i(log+ W^i) or E_i J_i(log+ |B^i|) over enumerated mass
    double tail_mass = 0.0;
    std::size_t samples = 0;
};

inline JMomentReport j_moment_test(const Model& model, std::size_t i, JTarget which, std::size_t horizon = 12) {
    JMomentReport rep;
    rep.finite = true;
    rep.basis = "structural: bounded atoms and geometric return-time tails";
    const auto j = j_function(model, i);
    try {
        const auto law = excursion_law(model, i, horizon);
        double num = 0.0, mass = 0.0;
        for (const auto& x : law.atoms) {
            const double v = which == JTarget::W ? x.w : std::abs(x.b);
            num += x.mass * j(v > 1.0 ? std::log(v) : 0.0);
            mass += x.mass;
        }
        rep.estimate = mass > 0.0 ? num / mass : 0.0;
        rep.tail_mass = law.tail_mass;
    } catch (const Error&) {
        rep.estimate = std::numeric_limits<double>::quiet_NaN();
        rep.tail_mass = 1.0;
    }
    return rep;
}

inline constexpr std::size_t kMinMonteCarloSamples = 10;

inline JMomentReport j_moment_test(const ExcursionBatch& batch, JTarget which) {
    if (batch.samples.size() < kMinMonteCarloSamples)
        throw Error(ErrorCode::InsufficientSamples, "need at least " + std::to_string(kMinMonteCarloSamples) + " excursions");
    const auto j = j_function(batch);
    JMomentReport rep;
    rep.basis = "monte carlo";
    rep.samples = batch.samples.size();
    double sum = 0.0;
    for (const auto& x : batch.samples) {
        const double v = which == JTarget::W ? x.w_i : std::abs(x.b_i);
        sum += j(v > 1.0 ? std::log(v) : 0.0);
    }
    rep.estimate = sum / static_cast<double>(batch.samples.size());
    rep.finite = std::isfinite(rep.estimate);
    return rep;
}

// Chain on S x {+1,-1}: (s, d) -> (t, d * sign(a)). Index of (s, d) is
// 2 s + (d < 0).
struct SignChain {
    std::size_t base_states = 0;
    std::vector<double> transition;  // row-major, (2n) x (2n)
    std::vector<bool> in_class;      // closed class reached from (start, +1)
    std::vector<double> stationary;  // supported on that class
    int period = 1;
    std::vector<int> cyclic_class;  // 0 or 1 inside the class (0 holds (start,+1)), -1 outside
    std::size_t start = 0;

    static std::size_t index(std::size_t s, int d) { return 2 * s + (d < 0 ? 1 : 0); }
    double p(std::size_t u, std::size_t v) const { return transition[u * 2 * base_states + v]; }
};

namespace detail {

inline void require_t2p(const Model& model, const char* what) {
    if (!null_homology(model).null_homologous)
        throw Error(ErrorCode::PreconditionRegime, std::string(what) + " needs a null-homologous (T2p) model");
}

inline std::vector<double> sign_transition(const Model& model) {
    const std::size_t n = model.size(), m = 2 * n;
    std::vector<double> T(m * m, 0.0);
    for (const auto& [s, t] : model.edge_list())
        for (const auto& c : model.edge(s, t))
            for (int d : {1, -1}) {
                const int e = c.a > 0.0 ? d : -d;
                T[SignChain::index(s, d) * m + SignChain::index(t, e)] += model.p(s, t) * c.w;
            }
    return T;
}

} // namespace detail

inline SignChain augmented_sign_chain(const Model& model, std::size_t start = 0) {
    detail::require_t2p(model, "augmented_sign_chain");
    SignChain sc;
    sc.base_states = model.size();
    sc.start = start;
    sc.transition = detail::sign_transition(model);
    const std::size_t m = 2 * model.size();
    std::vector<long> level(m, -1);
    std::vector<std::size_t> order{SignChain::index(start, 1)};
    level[order[0]] = 0;
    for (std::size_t k = 0; k < order.size(); ++k)
        for (std::size_t v = 0; v < m; ++v)
            if (sc.p(order[k], v) > 0.0 && level[v] < 0) {
                level[v] = level[order[k]] + 1;
                order.push_back(v);
            }
    sc.in_class.assign(m, false);
    for (std::size_t v : order) sc.in_class[v] = true;
    long g = 0;
    for (std::size_t u : order)
        for (std::size_t v = 0; v < m; ++v)
            if (sc.p(u, v) > 0.0) g = std::gcd(g, std::labs(level[u] + 1 - level[v]));
    sc.period = static_cast<int>(g);
    sc.cyclic_class.assign(m, -1);
    for (std::size_t v : order) sc.cyclic_class[v] = sc.period == 2 ? static_cast<int>(level[v] % 2) : 0;

    const auto k = static_cast<Eigen::Index>(order.size());
    Eigen::MatrixXd M(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c) M(c, r) = sc.p(order[static_cast<std::size_t>(r)], order[static_cast<std::size_t>(c)]);
    M -= Eigen::MatrixXd::Identity(k, k);
    M.row(k - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    rhs(k - 1) = 1.0;
    const Eigen::VectorXd x = M.fullPivLu().solve(rhs);
    sc.stationary.assign(m, 0.0);
    for (Eigen::Index r = 0; r < k; ++r) sc.stationary[order[static_cast<std::size_t>(r)]] = x(r);
    return sc;
}

struct HatTauReport {
    bool two_periodic = false;
    double prob_plus_one = 1.0;   // P_i(A^i = 1)
    double prob_minus_one = 0.0;  // P_i(A^i = -1)
};

// Exact P_i(A^i = +1) from first-passage probabilities of the sign chain.
inline HatTauReport hat_tau_periodicity(const Model& model, std::size_t i) {
    detail::require_t2p(model, "hat_tau_periodicity");
    const std::size_t n = model.size();
    const auto T = detail::sign_transition(model);
    const std::size_t m = 2 * n;
    // Unknowns h(s, d) for s != i: probability of reaching i with sign +1.
    std::vector<long> slot(m, -1);
    Eigen::Index k = 0;
    for (std::size_t s = 0; s < n; ++s)
        if (s != i) {
            slot[SignChain::index(s, 1)] = k++;
            slot[SignChain::index(s, -1)] = k++;
        }
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (std::size_t u = 0; u < m; ++u) {
        if (slot[u] < 0) continue;
        for (std::size_t v = 0; v < m; ++v) {
            const double q = T[u * m + v];
            if (q == 0.0) continue;
            if (v / 2 == i) {
                if (v % 2 == 0) rhs(slot[u]) += q;
            } else {
                M(slot[u], slot[v]) -= q;
            }
        }
    }
    Eigen::VectorXd h = k > 0 ? Eigen::VectorXd(M.fullPivLu().solve(rhs)) : Eigen::VectorXd();
    const std::size_t root = SignChain::index(i, 1);
    double plus = 0.0;
    for (std::size_t v = 0; v < m; ++v) {
        const double q = T[root * m + v];
        if (q == 0.0) continue;
        if (v / 2 == i) plus += v % 2 == 0 ? q : 0.0;
        else plus += q * h(slot[v]);
    }
    HatTauReport rep;
    rep.prob_plus_one = std::clamp(plus, 0.0, 1.0);
    rep.prob_minus_one = 1.0 - rep.prob_plus_one;
    rep.two_periodic = rep.prob_plus_one <= 1e-12;
    return rep;
}

struct ClassificationReport {
    std::size_t state = 0;
    std::string mode = "exact";
    StandingAssumptionReport standing;
    MrwTrichotomy mrw;
    EmbeddedTrichotomy embedded;
    NullHomologyResult homology;
    JMomentReport j_w;
    JMomentReport j_b;
    std::optional<HatTauReport> hat_tau;
    std::optional<SignChain> sign_chain;
};

inline ClassificationReport classify(const Model& model, std::size_t i = 0) {
    ClassificationReport r;
    r.state = i;
    r.standing = check_standing_assumption(model);
    r.homology = null_homology(model);
    r.embedded = embedded_trichotomy(model, i);
    r.mrw = mrw_trichotomy(model);
    r.j_w = j_moment_test(model, i, JTarget::W);
    r.j_b = j_moment_test(model, i, JTarget::B);
    if (r.embedded.tag == EmbeddedTag::T2p) {
        r.hat_tau = hat_tau_periodicity(model, i);
        r.sign_chain = augmented_sign_chain(model, i);
    }
    return r;
}

// Monte Carlo classification for generator models.
struct MonteCarloClassification {
    EmbeddedTag embedded = EmbeddedTag::T1p;
    MrwTag mrw = MrwTag::T1;
    std::size_t excursions = 0;
    double mean_log_a = 0.0;   // mean of log|A^i|
    double std_error = 0.0;
    double hill_tail_index = std::numeric_limits<double>::infinity();  // tail index of within-excursion overshoot
    double max_log_overshoot = 0.0;
    std::size_t unit_returns = 0;
    std::string basis;
};

// Hill estimator over the positive values of xs.
inline double hill_tail_index(std::vector<double> xs) {
    std::erase_if(xs, [](double x) { return !(x > 0.0) || !std::isfinite(x); });
    if (xs.size() < 50) return std::numeric_limits<double>::infinity();
    std::sort(xs.begin(), xs.end(), std::greater<>());
    const std::size_t k = std::max<std::size_t>(10, static_cast<std::size_t>(std::sqrt(static_cast<double>(xs.size()))));
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::log(xs[j] / xs[k]);
    s /= static_cast<double>(k);
    return s > 0.0 ? 1.0 / s : std::numeric_limits<double>::infinity();
}

// The embedded tag comes from the sign of the mean of log|A^i|. With T1p,
// the full walk still has limsup log|Pi_n| = +inf exactly when the
// within-excursion overshoot has infinite mean; a Hill tail index at or
// below 1.5 is taken as evidence of that.
inline MonteCarloClassification classify_generator(const GeneratorModel& gen, std::uint64_t ref, std::size_t excursions,
                                                   std::uint64_t seed, std::uint64_t step_cap = kDefaultStepCap,
                                                   int threads = 0) {
    if (excursions < kMinMonteCarloSamples)
        throw Error(ErrorCode::InsufficientSamples, "need at least " + std::to_string(kMinMonteCarloSamples) + " excursions");
    const auto batch = sample_excursions(gen, ref, excursions, seed, step_cap, threads);
    MonteCarloClassification out;
    out.excursions = batch.samples.size();
    double sum = 0.0, sq = 0.0;
    bool all_unit = true;
    std::vector<double> over;
    over.reserve(batch.samples.size());
    for (const auto& x : batch.samples) {
        sum += -x.s_tau;
        sq += x.s_tau * x.s_tau;
        all_unit = all_unit && std::abs(x.s_tau) <= 1e-12;
        out.unit_returns += x.pi_is_one;
        over.push_back(x.log_overshoot);
        out.max_log_overshoot = std::max(out.max_log_overshoot, x.log_overshoot);
    }
    const double N = static_cast<double>(out.excursions);
    out.mean_log_a = sum / N;
    out.std_error = std::sqrt(std::max(0.0, sq / N - out.mean_log_a * out.mean_log_a) / N);
    out.hill_tail_index = hill_tail_index(over);
    if (all_unit) {
        out.embedded = EmbeddedTag::T2p;
        out.mrw = MrwTag::T2;
        out.basis = "every sampled excursion has |A^i| = 1";
    } else if (out.mean_log_a < -3.0 * out.std_error) {
        out.embedded = EmbeddedTag::T1p;
        if (out.hill_tail_index <= 1.5) {
            out.mrw = MrwTag::T3;
            out.basis = "embedded drift negative; overshoot tail index <= 1.5 suggests limsup |Pi_n| = inf";
        } else {
            out.mrw = MrwTag::T1;
            out.basis = "embedded drift negative; overshoots light-tailed";
        }
    } else {
        out.embedded = EmbeddedTag::T3p;
        out.mrw = MrwTag::T3;
        out.basis = "embedded mean of log|A^i| not significantly negative";
    }
    return out;
}

} // namespace perpetua
