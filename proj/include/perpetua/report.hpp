#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "perpetua/classify.hpp"
#include "perpetua/degeneracy.hpp"
#include "perpetua/homology.hpp"
#include "perpetua/limits.hpp"
#include "perpetua/model.hpp"
#include "perpetua/model_io.hpp"
#include "perpetua/simulate.hpp"

namespace perpetua::report {

using io::Json;
using io::number;

inline Json numbers(const std::vector<double>& xs) {
    Json out = Json::array();
    for (double x : xs) out.push_back(number(x));
    return out;
}

inline Json standing(const StandingAssumptionReport& r) {
    return Json{{"holds", r.holds()},
                {"a_never_zero", r.a_never_zero},
                {"b_not_identically_zero", r.b_not_identically_zero},
                {"prob_a_zero", r.prob_a_zero},
                {"prob_b_zero", r.prob_b_zero}};
}

inline Json homology(const NullHomologyResult& h, const Model& model) {
    Json out{{"null_homologous", h.null_homologous}};
    if (h.null_homologous) {
        out["g"] = numbers(h.witness.g);
        out["a"] = numbers(h.witness.a);
        if (h.witness.sigma) out["sigma"] = *h.witness.sigma;
        else out["sigma"] = nullptr;
    }
    if (h.violation) {
        Json cycle = Json::array();
        for (auto s : h.violation->cycle) cycle.push_back(model.label(s));
        out["violation"] = Json{{"cycle", cycle}, {"abs_product", number(h.violation->abs_product)}, {"reason", h.violation->reason}};
    }
    return out;
}

inline Json evidence(const TrichotomyEvidence& e) {
    return Json{{"log_drift", number(e.log_drift)}, {"null_homologous", e.null_homologous}, {"basis", e.basis}};
}

inline Json j_moment(const JMomentReport& r) {
    return Json{{"finite", r.finite}, {"basis", r.basis}, {"estimate", number(r.estimate)}, {"tail_mass", r.tail_mass}, {"samples", r.samples}};
}

inline Json sign_chain(const SignChain& sc, const Model& model) {
    Json states = Json::array();
    for (std::size_t v = 0; v < sc.in_class.size(); ++v) {
        if (!sc.in_class[v]) continue;
        states.push_back(Json{{"state", model.label(v / 2)},
                              {"sign", v % 2 == 0 ? 1 : -1},
                              {"stationary", sc.stationary[v]},
                              {"cyclic_class", sc.cyclic_class[v]}});
    }
    return Json{{"period", sc.period}, {"class", states}};
}

inline Json classification(const ClassificationReport& r, const Model& model) {
    Json out{{"state", model.label(r.state)},
             {"mode", r.mode},
             {"mrw_tag", to_string(r.mrw.tag)},
             {"embedded_tag", to_string(r.embedded.tag)},
             {"evidence", evidence(r.embedded.evidence)},
             {"standing_assumption", standing(r.standing)},
             {"homology", homology(r.homology, model)},
             {"j_moment", Json{{"w", j_moment(r.j_w)}, {"b", j_moment(r.j_b)}}}};
    if (r.hat_tau)
        out["hat_tau"] = Json{{"two_periodic", r.hat_tau->two_periodic},
                              {"prob_plus_one", r.hat_tau->prob_plus_one},
                              {"prob_minus_one", r.hat_tau->prob_minus_one}};
    else
        out["hat_tau"] = nullptr;
    out["sign_chain"] = r.sign_chain ? sign_chain(*r.sign_chain, model) : Json(nullptr);
    return out;
}

inline Json monte_carlo(const MonteCarloClassification& c) {
    return Json{{"mode", "monte_carlo"},
                {"embedded_tag", to_string(c.embedded)},
                {"mrw_tag", to_string(c.mrw)},
                {"excursions", c.excursions},
                {"mean_log_abs_a", number(c.mean_log_a)},
                {"std_error", number(c.std_error)},
                {"hill_tail_index", number(c.hill_tail_index)},
                {"max_log_overshoot", number(c.max_log_overshoot)},
                {"unit_returns", c.unit_returns},
                {"basis", c.basis}};
}

inline Json degeneracy(const DegeneracyReport& d, const Model& model) {
    Json out{{"status", to_string(d.status)}, {"form", d.dual_form ? "dual" : "backward"}};
    if (d.status == DegeneracyStatus::UniqueC) out["c"] = numbers(d.c);
    if (d.status == DegeneracyStatus::CFamily) {
        Json maps = Json::array();
        for (const auto& m : d.to_reference) maps.push_back(Json{{"slope", number(m.slope)}, {"intercept", number(m.intercept)}});
        out["family"] = Json{{"reference", model.label(d.reference)}, {"member", numbers(d.c)}, {"c_from_reference", maps}};
        Json phi = Json::array();
        for (const auto& [i, j] : model.edge_list()) {
            const auto m = d.phi(i, j);
            phi.push_back(Json{{"from", model.label(i)}, {"to", model.label(j)}, {"slope", number(m.slope)}, {"intercept", number(m.intercept)}});
        }
        out["phi"] = phi;
    }
    out["max_residual"] = number(d.max_residual);
    if (d.witness)
        out["witness"] = Json{{"from", model.label(d.witness->from)},
                              {"to", model.label(d.witness->to)},
                              {"atom", d.witness->atom},
                              {"residual", number(d.witness->residual)},
                              {"reason", d.witness->reason}};
    return out;
}

inline Json b_zero(const BZeroCertificate& c) {
    Json out{{"value", c.value}, {"basis", c.basis}};
    if (c.witness) out["witness"] = Json{{"tau", c.witness->tau}, {"a", c.witness->a}, {"b", c.witness->b}, {"mass", c.witness->mass}};
    return out;
}

inline Json sample_summary(const SampleSet& s, bool include_law = true, std::size_t max_atoms = 50) {
    std::vector<double> v;
    v.reserve(s.values.size());
    for (double x : s.values)
        if (std::isfinite(x)) v.push_back(x);
    std::sort(v.begin(), v.end());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean = v.empty() ? 0.0 : mean / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
    const auto q = [&](double p) {
        if (v.empty()) return 0.0;
        return v[std::min(v.size() - 1, static_cast<std::size_t>(p * static_cast<double>(v.size())))];
    };
    Json out{{"n", s.n},
             {"replicas", s.values.size()},
             {"seed", s.seed},
             {"overflowed", s.overflowed.size()},
             {"mean", number(mean)},
             {"std", number(std::sqrt(var))},
             {"min", number(v.empty() ? 0.0 : v.front())},
             {"q05", number(q(0.05))},
             {"median", number(q(0.5))},
             {"q95", number(q(0.95))},
             {"max", number(v.empty() ? 0.0 : v.back())}};
    if (include_law) {
        const auto law = s.law();
        if (law.size() <= max_atoms) out["law"] = io::law_to_json(law);
        else out["distinct_values"] = law.size();
    }
    return out;
}

inline Json limit(const LimitLaw& l, const Model& model) {
    Json out{{"direction", to_string(l.direction)}, {"state", model.label(l.state)}, {"case", l.case_tag}};
    std::visit([&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PointMassVector>) {
            out["kind"] = "point_mass_vector";
            out["c"] = numbers(v.c);
            out["stationary_mixture"] = v.stationary_mixture;
        } else if constexpr (std::is_same_v<T, EmpiricalLaw>) {
            out["kind"] = "empirical";
            out["samples"] = v.sample_count;
            out["horizon"] = v.horizon;
            out["seed"] = v.seed;
            out["residual"] = number(v.residual);
            out["source"] = v.source;
        } else if constexpr (std::is_same_v<T, ErgodicMixture>) {
            out["kind"] = "ergodic_mixture";
            Json comps = Json::array();
            for (const auto& c : v.components) comps.push_back(Json{{"weight", c.weight}, {"slope", number(c.slope)}, {"intercept", number(c.intercept)}});
            out["components"] = comps;
            out["base"] = io::law_to_json(v.base);
        } else if constexpr (std::is_same_v<T, DivergesToInfinity>) {
            out["kind"] = "diverges_to_infinity";
            out["reason"] = v.reason;
        } else {
            out["kind"] = "no_limit";
            out["reason"] = v.reason;
        }
    }, l.value);
    if (const auto law = l.law()) {
        if (law->size() <= 200) out["law"] = io::law_to_json(*law);
        else out["law_summary"] = Json{{"distinct_values", law->size()}, {"mean", number(law->mean())}};
    }
    return out;
}

inline Json validation(const ValidationSummary& v) {
    Json cps = Json::array();
    for (auto c : v.checkpoints) cps.push_back(c);
    return Json{{"passed", v.passed},
                {"method", v.method},
                {"checkpoints", cps},
                {"statistics", numbers(v.statistics)},
                {"threshold", v.threshold},
                {"replicas", v.replicas},
                {"seed", v.seed}};
}

inline Json kernel(const Kernel& k, const Model& model, std::size_t max_atoms = 200) {
    Json out = Json::object();
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (k[i].size() <= max_atoms) out[model.label(i)] = io::law_to_json(k[i]);
        else out[model.label(i)] = Json{{"distinct_values", k[i].size()}, {"mean", number(k[i].mean())}};
    }
    return out;
}

inline Json fixed_point(const FixedPointReport& r) {
    Json out{{"case", to_string(r.fp_case)},
             {"embedded_tag", to_string(r.embedded)},
             {"exists", r.exists},
             {"unique", r.unique},
             {"description", r.description}};
    if (r.degeneracy.degenerate()) {
        out["degeneracy"] = to_string(r.degeneracy.status);
        out["c"] = numbers(r.degeneracy.c);
    }
    if (!r.a.empty()) out["a"] = numbers(r.a);
    if (r.sigma) out["sigma"] = *r.sigma;
    return out;
}

} // namespace perpetua::report
