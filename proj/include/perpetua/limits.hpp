#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "perpetua/classify.hpp"
#include "perpetua/degeneracy.hpp"
#include "perpetua/discrete_law.hpp"
#include "perpetua/error.hpp"
#include "perpetua/homology.hpp"
#include "perpetua/model.hpp"
#include "perpetua/simulate.hpp"

namespace perpetua {

enum class Direction { Backward, Forward };

inline std::string to_string(Direction d) { return d == Direction::Backward ? "backward" : "forward"; }

// Q_i = delta_{c_i}, or Q = sum_j pi_j delta_{c_j} when stationary_mixture.
struct PointMassVector {
    std::vector<double> c;
    bool stationary_mixture = false;
    std::vector<double> pi;
};

struct EmpiricalLaw {
    DiscreteLaw law;
    std::size_t sample_count = 0;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    double residual = 0.0;  // max |Pi_horizon| over the samples
    std::string source;
};

struct AffineComponent {
    double weight = 0.0;
    double slope = 1.0;
    double intercept = 0.0;
};

// sum_k weight_k * law(slope_k X + intercept_k) with X drawn from base.
struct ErgodicMixture {
    std::vector<AffineComponent> components;
    DiscreteLaw base;
};

struct DivergesToInfinity {
    std::string reason;
};

struct NoLimit {
    std::string reason;
};

using LimitVariant = std::variant<PointMassVector, EmpiricalLaw, ErgodicMixture, DivergesToInfinity, NoLimit>;

struct LimitLaw {
    Direction direction = Direction::Backward;
    std::size_t state = 0;
    std::string case_tag;
    LimitVariant value;

    bool has_law() const {
        return std::holds_alternative<PointMassVector>(value) || std::holds_alternative<EmpiricalLaw>(value) ||
               std::holds_alternative<ErgodicMixture>(value);
    }

    // The limit law itself, when there is one.
    std::optional<DiscreteLaw> law() const {
        if (const auto* p = std::get_if<PointMassVector>(&value)) {
            if (!p->stationary_mixture) return DiscreteLaw::point(p->c.at(state));
            std::vector<Atom> atoms;
            for (std::size_t j = 0; j < p->c.size(); ++j) atoms.push_back({p->c[j], p->pi[j]});
            return DiscreteLaw::from_atoms(std::move(atoms));
        }
        if (const auto* e = std::get_if<EmpiricalLaw>(&value)) return e->law;
        if (const auto* m = std::get_if<ErgodicMixture>(&value)) return materialize(*m);
        return std::nullopt;
    }

    static DiscreteLaw materialize(const ErgodicMixture& m) {
        std::vector<std::pair<double, DiscreteLaw>> parts;
        for (const auto& c : m.components) parts.emplace_back(c.weight, m.base.affine(c.slope, c.intercept));
        return DiscreteLaw::mixture(parts);
    }
};

struct LimitOptions {
    std::size_t samples = 100'000;
    std::size_t horizon = 400;
    std::uint64_t seed = 0;
    int threads = 0;
    double tol = kDegeneracyTol;
};

namespace detail {

struct SignedWeight {
    std::size_t j;
    int sign;
    double weight;
};

// Limit weights of (M_n, sign Pi_n) under P_i along even and odd times.
struct SignedOccupation {
    std::vector<SignedWeight> even;
    std::vector<SignedWeight> odd;
    bool periodic = false;
};

inline SignedOccupation signed_occupation(const Model& model, std::size_t i) {
    const auto sc = augmented_sign_chain(model, i);
    SignedOccupation occ;
    occ.periodic = sc.period == 2;
    for (std::size_t v = 0; v < sc.in_class.size(); ++v) {
        if (!sc.in_class[v] || sc.stationary[v] <= 0.0) continue;
        const SignedWeight w{v / 2, v % 2 == 0 ? 1 : -1, sc.stationary[v]};
        if (!occ.periodic) {
            occ.even.push_back(w);
            occ.odd.push_back(w);
        } else {
            (sc.cyclic_class[v] == 0 ? occ.even : occ.odd).push_back({w.j, w.sign, 2.0 * w.weight});
        }
    }
    return occ;
}

// Builds the mixture for Psi = target + Pi_n (Z_0 - source) in the
// null-homologous case, where Pi_n = sign * a_i / a_{M_n}.
template <class Map>
LimitLaw signed_mixture_limit(const Model& model, std::size_t i, const DiscreteLaw& base, Direction dir,
                              const std::string& tag, Map&& component, double tol) {
    const auto occ = signed_occupation(model, i);
    const auto build = [&](const std::vector<SignedWeight>& ws) {
        ErgodicMixture m;
        m.base = base;
        for (const auto& w : ws) m.components.push_back(component(w));
        return m;
    };
    LimitLaw out;
    out.direction = dir;
    out.state = i;
    const ErgodicMixture even = build(occ.even);
    if (occ.periodic) {
        const ErgodicMixture odd = build(occ.odd);
        const double gap = tv_distance(LimitLaw::materialize(even), LimitLaw::materialize(odd), 1e-9);
        if (gap > tol) {
            out.case_tag = "periodic_asymmetric";
            out.value = NoLimit{"return products alternate in sign and the even- and odd-time limits differ (TV " +
                                std::to_string(gap) + ")"};
            return out;
        }
        out.case_tag = tag + "_periodic";
    } else {
        out.case_tag = tag;
    }
    out.value = even;
    return out;
}

inline bool has_atom_near(const DiscreteLaw& law, double x, double tol) {
    for (const auto& a : law.atoms())
        if (values_close(a.v, x, tol)) return true;
    return false;
}

inline LimitLaw make_limit(Direction dir, std::size_t i, std::string tag, LimitVariant v) {
    LimitLaw out;
    out.direction = dir;
    out.state = i;
    out.case_tag = std::move(tag);
    out.value = std::move(v);
    return out;
}

inline EmpiricalLaw empirical_perpetuity(const Model& model, std::size_t start, const LimitOptions& opt, std::string source) {
    const auto res = perpetuity_samples(model, start, opt.samples, opt.horizon, opt.seed, opt.threads);
    EmpiricalLaw e;
    e.law = res.samples.law();
    e.sample_count = opt.samples;
    e.horizon = opt.horizon;
    e.seed = opt.seed;
    e.residual = res.max_abs_pi;
    e.source = std::move(source);
    return e;
}

} // namespace detail

LimitLaw trivial_regime(const Model& model, std::size_t i, const InitialLaw& z0, Direction dir = Direction::Backward,
                        const LimitOptions& opt = {});

// Weak limit of Psi_{1:n}(Z_0) under P_i.
inline LimitLaw backward_limit(const Model& model, std::size_t i, const InitialLaw& z0, const LimitOptions& opt = {}) {
    if (i >= model.size()) throw Error(ErrorCode::BadShape, "state index out of range");
    const Direction dir = Direction::Backward;
    if (!check_standing_assumption(model).holds()) return trivial_regime(model, i, z0, dir, opt);
    const auto emb = embedded_trichotomy(model, i, opt.tol);
    const auto deg = detect(model, opt.tol);
    switch (emb.tag) {
    case EmbeddedTag::T1p:
        if (deg.degenerate()) return detail::make_limit(dir, i, "perpetuity_degenerate", PointMassVector{deg.c, false, {}});
        return detail::make_limit(dir, i, "perpetuity", detail::empirical_perpetuity(model, i, opt, "perpetuity under P_i"));
    case EmbeddedTag::T2p: {
        if (!deg.degenerate())
            return detail::make_limit(dir, i, "diverges", DivergesToInfinity{"null-homologous but not degenerate"});
        const auto a = null_homology(model, opt.tol).witness.a;
        const auto& c = deg.c;
        return detail::signed_mixture_limit(model, i, z0.at(i), dir, "ergodic_mixture", [&](const detail::SignedWeight& w) {
            const double slope = w.sign * a[i] / a[w.j];
            return AffineComponent{w.weight, slope, c[i] - slope * c[w.j]};
        }, opt.tol);
    }
    case EmbeddedTag::T3p: {
        if (!deg.degenerate())
            return detail::make_limit(dir, i, "diverges", DivergesToInfinity{"|Pi| unbounded along returns and not degenerate"});
        const auto& c = deg.c;
        const bool constant = std::all_of(c.begin(), c.end(), [&](double x) { return values_close(x, c[0], opt.tol); });
        const auto& zl = z0.at(i);
        if (constant && zl.is_point_mass(opt.tol) && values_close(zl.atoms().front().v, c[0], opt.tol))
            return detail::make_limit(dir, i, "constant_fixed_point", PointMassVector{c, false, {}});
        bool avoids = true;
        for (double cj : c) avoids = avoids && !detail::has_atom_near(zl, cj, opt.tol);
        if (stationary_log_drift(model) > opt.tol && avoids)
            return detail::make_limit(dir, i, "diverges",
                                      DivergesToInfinity{"|Pi_n| -> infinity and Z_0 puts no mass on any c_j"});
        return detail::make_limit(dir, i, "no_limit", NoLimit{"degenerate with |Pi| unbounded, but Z_0 is not the common constant"});
    }
    }
    throw Error(ErrorCode::UnclassifiedModel, "unreachable classification");
}

// Weak limit of Psi_{n:1}(Z_0) under P_i.
inline LimitLaw forward_limit(const Model& model, std::size_t i, const InitialLaw& z0, const LimitOptions& opt = {}) {
    if (i >= model.size()) throw Error(ErrorCode::BadShape, "state index out of range");
    const Direction dir = Direction::Forward;
    if (!check_standing_assumption(model).holds()) return trivial_regime(model, i, z0, dir, opt);
    const auto emb = embedded_trichotomy(model, i, opt.tol);
    const auto deg = detect_dual(model, opt.tol);
    switch (emb.tag) {
    case EmbeddedTag::T1p:
        if (deg.degenerate())
            return detail::make_limit(dir, i, "perpetuity_degenerate", PointMassVector{deg.c, true, model.pi()});
        return detail::make_limit(dir, i, "perpetuity",
                                  detail::empirical_perpetuity(dual(model), kStationaryStart, opt, "dual perpetuity under P_pi"));
    case EmbeddedTag::T2p: {
        if (!deg.degenerate())
            return detail::make_limit(dir, i, "diverges", DivergesToInfinity{"null-homologous but not dual-degenerate"});
        const auto a = null_homology(model, opt.tol).witness.a;
        const auto& c = deg.c;
        return detail::signed_mixture_limit(model, i, z0.at(i), dir, "ergodic_mixture", [&](const detail::SignedWeight& w) {
            const double slope = w.sign * a[i] / a[w.j];
            return AffineComponent{w.weight, slope, c[w.j] - slope * c[i]};
        }, opt.tol);
    }
    case EmbeddedTag::T3p: {
        if (!deg.degenerate())
            return detail::make_limit(dir, i, "diverges", DivergesToInfinity{"|Pi| unbounded along returns and not dual-degenerate"});
        const auto& c = deg.c;
        const auto& zl = z0.at(i);
        if (zl.is_point_mass(opt.tol) && values_close(zl.atoms().front().v, c[i], opt.tol))
            return detail::make_limit(dir, i, "stationary_constants", PointMassVector{c, true, model.pi()});
        if (stationary_log_drift(model) > opt.tol && !detail::has_atom_near(zl, c[i], opt.tol))
            return detail::make_limit(dir, i, "diverges", DivergesToInfinity{"|Pi_n| -> infinity and Z_0 puts no mass on c_i"});
        return detail::make_limit(dir, i, "no_limit", NoLimit{"dual-degenerate with |Pi| unbounded, but Z_0 != c_i"});
    }
    }
    throw Error(ErrorCode::UnclassifiedModel, "unreachable classification");
}

// Limits when P_pi(A = 0) > 0 or B = 0 almost surely.
inline LimitLaw trivial_regime(const Model& model, std::size_t i, const InitialLaw& z0, Direction dir, const LimitOptions& opt) {
    const auto standing = check_standing_assumption(model);
    if (standing.holds()) throw Error(ErrorCode::StandingAssumptionHolds, "the standing assumption holds; use the main dispatch");
    if (!standing.a_never_zero) {
        const bool back = dir == Direction::Backward;
        const Model m = back ? model : dual(model);
        const std::size_t start = back ? i : kStationaryStart;
        const auto set = stopped_perpetuity_samples(m, start, opt.samples, opt.seed, kDefaultStepCap, opt.threads);
        EmpiricalLaw e;
        e.law = set.law();
        e.sample_count = opt.samples;
        e.seed = opt.seed;
        e.source = back ? "sum up to the first zero of A under P_i" : "dual sum up to the first zero of A under P_pi";
        return detail::make_limit(dir, i, "stopped_perpetuity", e);
    }
    // B = 0: both iterations reduce to Pi_n Z_0.
    const auto& zl = z0.at(i);
    const std::vector<double> zeros(model.size(), 0.0);
    if (zl.is_point_mass() && zl.atoms().front().v == 0.0)
        return detail::make_limit(dir, i, "zero", PointMassVector{zeros, false, {}});
    const auto emb = embedded_trichotomy(model, i, opt.tol);
    if (emb.tag == EmbeddedTag::T1p) return detail::make_limit(dir, i, "zero", PointMassVector{zeros, false, {}});
    if (emb.tag == EmbeddedTag::T2p) {
        const auto a = null_homology(model, opt.tol).witness.a;
        return detail::signed_mixture_limit(model, i, zl, dir, "occupation", [&](const detail::SignedWeight& w) {
            return AffineComponent{w.weight, w.sign * a[i] / a[w.j], 0.0};
        }, opt.tol);
    }
    if (stationary_log_drift(model) > opt.tol && !detail::has_atom_near(zl, 0.0, opt.tol))
        return detail::make_limit(dir, i, "diverges", DivergesToInfinity{"|Pi_n| -> infinity with B = 0 and Z_0 != 0"});
    return detail::make_limit(dir, i, "no_limit", NoLimit{"B = 0 with |Pi_n| not converging"});
}

// ---------------------------------------------------------------------------
// Kernel fixed points of Psi_1.

using Kernel = std::vector<DiscreteLaw>;

inline constexpr std::size_t kKernelAtomCap = 10'000'000;

// (Psi_1 P)(i, .) = sum_j p_ij sum_atoms w * law(a R + b), R ~ P(j, .).
inline Kernel psi_apply(const Model& model, const Kernel& kernel, std::size_t atom_cap = kKernelAtomCap) {
    if (kernel.size() != model.size()) throw Error(ErrorCode::BadShape, "kernel must have one law per state");
    Kernel out(model.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        std::vector<Atom> atoms;
        for (std::size_t j : model.successors(i))
            for (const auto& c : model.edge(i, j)) {
                const double w = model.p(i, j) * c.w;
                for (const auto& r : kernel[j].atoms()) atoms.push_back({c.a * r.v + c.b, w * r.m});
            }
        total += atoms.size();
        if (total > atom_cap) throw Error(ErrorCode::AtomCap, "kernel image exceeds " + std::to_string(atom_cap) + " atoms");
        out[i] = DiscreteLaw::from_atoms(std::move(atoms));
    }
    return out;
}

inline double kernel_distance(const Kernel& p, const Kernel& q) {
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) d = std::max(d, w1_distance(p[i], q[i]));
    return d;
}

struct FixedPointSolution {
    Kernel kernel;
    std::vector<double> residuals;
    std::size_t iterations = 0;
};

class NoConvergenceError : public Error {
public:
    NoConvergenceError(const std::string& what, std::vector<double> trace)
        : Error(ErrorCode::NoConvergence, what), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

// Laws above max_atoms are projected onto a dyadic grid fine enough to keep
// about max_atoms / 2 points, preserving mass and mean.
inline double coarsening_step(const DiscreteLaw& law, std::size_t max_atoms) {
    const double span = std::max(law.max_value() - law.min_value(), 1e-300);
    return std::exp2(std::ceil(std::log2(span / static_cast<double>(max_atoms / 2))));
}

inline DiscreteLaw coarsen(const DiscreteLaw& law, std::size_t max_atoms) {
    if (law.size() <= max_atoms) return law;
    return law.grid_projected(coarsening_step(law, max_atoms));
}

// Once a law overflows, every later iterate is projected on a grid that
// never gets finer, so the projected map stays a fixed contraction.
inline FixedPointSolution fixed_point_solve(const Model& model, Kernel init, std::size_t max_iters = 200, double tol = 1e-6,
                                            std::size_t max_atoms_per_state = std::size_t{1} << 16) {
    if (embedded_trichotomy(model).tag != EmbeddedTag::T1p)
        throw Error(ErrorCode::PreconditionRegime, "fixed-point iteration needs the contracting regime");
    FixedPointSolution sol;
    sol.kernel = std::move(init);
    double h = 0.0;
    for (std::size_t k = 1; k <= max_iters; ++k) {
        Kernel next = psi_apply(model, sol.kernel);
        for (const auto& law : next)
            if (h > 0.0 || law.size() > max_atoms_per_state) h = std::max(h, coarsening_step(law, max_atoms_per_state));
        if (h > 0.0)
            for (auto& law : next) law = law.grid_projected(h);
        const double r = kernel_distance(sol.kernel, next);
        sol.residuals.push_back(r);
        sol.kernel = std::move(next);
        sol.iterations = k;
        if (r <= tol) return sol;
    }
    throw NoConvergenceError("residual " + std::to_string(sol.residuals.back()) + " above tolerance after " +
                                 std::to_string(max_iters) + " iterations",
                             sol.residuals);
}

enum class FixedPointCase { C1, C2, C3, C4, None };

inline std::string to_string(FixedPointCase c) {
    switch (c) {
    case FixedPointCase::C1: return "C1";
    case FixedPointCase::C2: return "C2";
    case FixedPointCase::C3: return "C3";
    case FixedPointCase::C4: return "C4";
    case FixedPointCase::None: return "none";
    }
    return "?";
}

struct FixedPointReport {
    FixedPointCase fp_case = FixedPointCase::None;
    EmbeddedTag embedded = EmbeddedTag::T1p;
    bool exists = false;
    bool unique = false;
    std::string description;
    DegeneracyReport degeneracy;
    std::vector<double> a;                 // a_i = exp(g(i)) in C2/C3
    std::optional<std::vector<int>> sigma;  // C3

    // A concrete solution. C2 needs a law symmetric about 0; C3 accepts any
    // law; C1 is exact only for degenerate models; C4 ignores x.
    Kernel representative(const DiscreteLaw& x = DiscreteLaw::point(0.0), double c_reference = 0.0) const {
        const std::size_t n = degeneracy.to_reference.empty() ? degeneracy.c.size() : degeneracy.to_reference.size();
        Kernel k(n);
        switch (fp_case) {
        case FixedPointCase::C1:
        case FixedPointCase::C4:
            if (!degeneracy.degenerate())
                throw Error(ErrorCode::PreconditionRegime, "no finite-atom representative for this fixed point");
            for (std::size_t i = 0; i < n; ++i) k[i] = DiscreteLaw::point(degeneracy.c[i]);
            return k;
        case FixedPointCase::C2: {
            if (tv_distance(x, x.reflected(), 1e-12) > 1e-12) throw Error(ErrorCode::PreconditionRegime, "X must be symmetric");
            for (std::size_t i = 0; i < n; ++i) k[i] = x.affine(a[i], degeneracy.c[i]);
            return k;
        }
        case FixedPointCase::C3: {
            const auto c = degeneracy.member(c_reference);
            for (std::size_t i = 0; i < n; ++i) k[i] = x.affine(a[i] * (*sigma)[i], c[i]);
            return k;
        }
        case FixedPointCase::None: break;
        }
        throw Error(ErrorCode::PreconditionRegime, "the model has no fixed point");
    }
};

inline FixedPointReport fixed_point_classify(const Model& model, double tol = kDegeneracyTol) {
    FixedPointReport rep;
    rep.embedded = embedded_trichotomy(model, 0, tol).tag;
    if (check_standing_assumption(model).a_never_zero) rep.degeneracy = detect(model, tol);
    switch (rep.embedded) {
    case EmbeddedTag::T1p:
        rep.fp_case = FixedPointCase::C1;
        rep.exists = rep.unique = true;
        rep.description = rep.degeneracy.degenerate() ? "unique fixed point: delta_{c_i}, the law of the perpetuity"
                                                      : "unique fixed point: the law of the perpetuity";
        return rep;
    case EmbeddedTag::T2p: {
        const auto nh = null_homology(model, tol);
        rep.a = nh.witness.a;
        rep.sigma = nh.witness.sigma;
        if (!rep.degeneracy.degenerate()) {
            rep.description = "null-homologous but not degenerate: no fixed point";
            return rep;
        }
        rep.exists = true;
        if (rep.degeneracy.status == DegeneracyStatus::CFamily) {
            rep.fp_case = FixedPointCase::C3;
            rep.description = "fixed points law(a_i sigma_i X + c_i) for any X and any c in the family";
        } else {
            rep.fp_case = FixedPointCase::C2;
            rep.description = "fixed points law(a_i X + c_i) for X symmetric about 0";
        }
        return rep;
    }
    case EmbeddedTag::T3p:
        if (rep.degeneracy.degenerate()) {
            rep.fp_case = FixedPointCase::C4;
            rep.exists = rep.unique = true;
            rep.description = "unique fixed point delta_{c_i}";
        } else {
            rep.description = "|Pi| unbounded along returns and not degenerate: no fixed point";
        }
        return rep;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Simulation check of a claimed limit.

struct ValidationSummary {
    bool passed = false;
    std::string method;
    std::vector<std::size_t> checkpoints;
    std::vector<double> statistics;
    double threshold = 0.0;
    std::size_t replicas = 0;
    std::uint64_t seed = 0;
};

inline ValidationSummary validate_limit(const Model& model, const InitialLaw& z0, const LimitLaw& claim, std::size_t replicas,
                                        std::uint64_t seed, int threads = 0, double ks_threshold = 0.02,
                                        double value_tol = 1e-6) {
    const SimOptions opt{replicas, seed, threads};
    const auto run = [&](std::size_t n) {
        return claim.direction == Direction::Backward ? run_backward(model, claim.state, n, z0, opt)
                                                      : run_forward(model, claim.state, n, z0, opt);
    };
    ValidationSummary v;
    v.replicas = replicas;
    v.seed = seed;
    if (const auto law = claim.law()) {
        v.method = "ks_to_claim";
        v.threshold = ks_threshold;
        v.checkpoints = {200, 400};
        v.passed = true;
        for (std::size_t n : v.checkpoints) {
            const double d = ks_distance(run(n).law(), *law, value_tol);
            v.statistics.push_back(d);
            v.passed = v.passed && d <= ks_threshold;
        }
    } else if (std::holds_alternative<DivergesToInfinity>(claim.value)) {
        v.method = "mass_within_10";
        v.threshold = 0.05;
        v.checkpoints = {25, 50, 100, 200};
        for (std::size_t n : v.checkpoints) v.statistics.push_back(run(n).fraction_within(10.0));
        v.passed = v.statistics.back() < v.threshold;
        for (std::size_t k = 1; k < v.statistics.size(); ++k) v.passed = v.passed && v.statistics[k] <= v.statistics[k - 1];
    } else {
        v.method = "ks_between_checkpoints";
        v.threshold = ks_threshold;
        v.checkpoints = {200, 201, 400};
        const auto l200 = run(200).law(), l201 = run(201).law(), l400 = run(400).law();
        v.statistics = {ks_distance(l200, l201, value_tol), ks_distance(l200, l400, value_tol)};
        v.passed = std::max(v.statistics[0], v.statistics[1]) > ks_threshold;
    }
    return v;
}

} // namespace perpetua
