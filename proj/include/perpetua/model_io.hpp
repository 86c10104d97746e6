#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "perpetua/discrete_law.hpp"
#include "perpetua/error.hpp"
#include "perpetua/model.hpp"
#include "perpetua/simulate.hpp"

namespace perpetua::io {

using Json = nlohmann::ordered_json;

// Non-finite values are written as strings so reports stay valid JSON.
inline Json number(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

inline double to_double(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos == s.size()) return v;
        } catch (const std::exception&) {
        }
    }
    throw Error(ErrorCode::ParseError, "expected a number, got " + j.dump());
}

inline Json read_json_text(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("invalid JSON: ") + e.what());
    }
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return read_json_text(ss.str());
}

// ---------------------------------------------------------------------------
// Laws

inline Json law_to_json(const DiscreteLaw& law) {
    Json atoms = Json::array();
    for (const auto& a : law.atoms()) atoms.push_back(Json{{"v", number(a.v)}, {"m", a.m}});
    return Json{{"atoms", atoms}, {"tail_mass", law.tail_mass()}};
}

// Accepts {"atoms":[{v,m}], "tail_mass"}, a bare atom array, or a number.
inline DiscreteLaw law_from_json(const Json& j) {
    if (j.is_number() || j.is_string()) return DiscreteLaw::point(to_double(j));
    const Json* arr = &j;
    double tail = 0.0;
    if (j.is_object()) {
        if (!j.contains("atoms")) throw Error(ErrorCode::ParseError, "law object needs 'atoms'");
        arr = &j.at("atoms");
        if (j.contains("tail_mass")) tail = to_double(j.at("tail_mass"));
    }
    if (!arr->is_array()) throw Error(ErrorCode::ParseError, "law atoms must be an array");
    std::vector<Atom> atoms;
    double total = tail;
    for (const auto& a : *arr) {
        if (!a.is_object() || !a.contains("v") || !a.contains("m"))
            throw Error(ErrorCode::ParseError, "law atom needs 'v' and 'm'");
        const Atom atom{to_double(a.at("v")), to_double(a.at("m"))};
        if (!(atom.m >= 0.0) || !std::isfinite(atom.v)) throw Error(ErrorCode::BadWeights, "law atoms need finite v and m >= 0");
        total += atom.m;
        atoms.push_back(atom);
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::BadWeights, "law masses sum to " + std::to_string(total));
    return DiscreteLaw::from_atoms(std::move(atoms), kMergeTol, tail);
}

// Accepts a law (shared by every state) or {"per_state":[law, ...]}.
inline InitialLaw initial_law_from_json(const Json& j, std::size_t n) {
    if (j.is_object() && j.contains("per_state")) {
        const auto& arr = j.at("per_state");
        if (!arr.is_array() || arr.size() != n)
            throw Error(ErrorCode::BadShape, "per_state needs one law per state (" + std::to_string(n) + ")");
        InitialLaw z;
        for (const auto& l : arr) z.per_state.push_back(law_from_json(l));
        return z;
    }
    return InitialLaw::constant(law_from_json(j), n);
}

inline Json initial_law_to_json(const InitialLaw& z) {
    if (z.state_independent() && !z.per_state.empty()) return law_to_json(z.per_state.front());
    Json arr = Json::array();
    for (const auto& l : z.per_state) arr.push_back(law_to_json(l));
    return Json{{"per_state", arr}};
}

// A path to a JSON file, or inline JSON text.
inline Json json_argument(const std::string& arg) {
    const auto first = arg.find_first_not_of(" \t\n");
    if (first != std::string::npos && (arg[first] == '{' || arg[first] == '[' || arg[first] == '-' ||
                                       (arg[first] >= '0' && arg[first] <= '9')))
        return read_json_text(arg);
    return read_json_file(arg);
}

// ---------------------------------------------------------------------------
// Models

struct LoadedModel {
    Model model;
    std::optional<InitialLaw> initial_law;
};

inline std::size_t state_ref(const Json& j, const std::vector<std::string>& labels) {
    if (j.is_number_integer()) {
        const auto k = j.get<long long>();
        if (k < 0 || static_cast<std::size_t>(k) >= labels.size())
            throw Error(ErrorCode::BadShape, "state index " + std::to_string(k) + " out of range");
        return static_cast<std::size_t>(k);
    }
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == s) return i;
        throw Error(ErrorCode::BadShape, "unknown state label '" + s + "'");
    }
    throw Error(ErrorCode::ParseError, "state reference must be a label or an index");
}

inline ModelSpec spec_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "model must be a JSON object");
    for (const char* key : {"states", "transition", "edges"})
        if (!j.contains(key)) throw Error(ErrorCode::ParseError, std::string("model is missing '") + key + "'");
    ModelSpec spec;
    const auto& states = j.at("states");
    if (states.is_number_integer()) {
        spec = ModelSpec(states.get<std::size_t>());
    } else if (states.is_array()) {
        for (const auto& s : states) {
            if (s.is_string()) spec.labels.push_back(s.get<std::string>());
            else if (s.is_number_integer()) spec.labels.push_back(std::to_string(s.get<long long>()));
            else throw Error(ErrorCode::ParseError, "state labels must be strings or integers");
        }
    } else {
        throw Error(ErrorCode::ParseError, "'states' must be a label array or a count");
    }
    const std::size_t n = spec.labels.size();
    spec.transition.assign(n * n, 0.0);
    const auto& t = j.at("transition");
    if (!t.is_array()) throw Error(ErrorCode::ParseError, "'transition' must be an array");
    if (t.size() == n && n > 0 && t.front().is_array()) {
        for (std::size_t r = 0; r < n; ++r) {
            if (!t[r].is_array() || t[r].size() != n)
                throw Error(ErrorCode::BadShape, "transition row " + std::to_string(r) + " must have " + std::to_string(n) + " entries");
            for (std::size_t c = 0; c < n; ++c) spec.transition[r * n + c] = to_double(t[r][c]);
        }
    } else if (t.size() == n * n) {
        for (std::size_t k = 0; k < n * n; ++k) spec.transition[k] = to_double(t[k]);
    } else {
        throw Error(ErrorCode::BadShape, "transition must be n x n (n = " + std::to_string(n) + ")");
    }
    const auto& edges = j.at("edges");
    if (!edges.is_array()) throw Error(ErrorCode::ParseError, "'edges' must be an array");
    for (const auto& e : edges) {
        if (!e.is_object() || !e.contains("from") || !e.contains("to") || !e.contains("atoms"))
            throw Error(ErrorCode::ParseError, "edge needs 'from', 'to' and 'atoms'");
        const std::size_t from = state_ref(e.at("from"), spec.labels);
        const std::size_t to = state_ref(e.at("to"), spec.labels);
        if (spec.edges.count({from, to}))
            throw Error(ErrorCode::ParseError, "edge " + spec.labels[from] + "->" + spec.labels[to] + " listed twice");
        auto& law = spec.edges[{from, to}];
        for (const auto& a : e.at("atoms")) {
            if (!a.is_object() || !a.contains("a") || !a.contains("b"))
                throw Error(ErrorCode::ParseError, "coefficient atom needs 'a' and 'b'");
            law.atoms.push_back({a.contains("w") ? to_double(a.at("w")) : 1.0, to_double(a.at("a")), to_double(a.at("b"))});
        }
    }
    return spec;
}

inline LoadedModel model_from_json(const Json& j) {
    Model m = Model::validate(spec_from_json(j));
    std::optional<InitialLaw> z;
    if (j.contains("initial_law")) z = initial_law_from_json(j.at("initial_law"), m.size());
    return {std::move(m), std::move(z)};
}

inline LoadedModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

inline Json model_to_json(const Model& model, const std::optional<InitialLaw>& z0 = std::nullopt) {
    const std::size_t n = model.size();
    Json states = Json::array();
    for (const auto& l : model.labels()) states.push_back(l);
    Json transition = Json::array();
    for (std::size_t i = 0; i < n; ++i) {
        Json row = Json::array();
        for (std::size_t k = 0; k < n; ++k) row.push_back(model.p(i, k));
        transition.push_back(row);
    }
    Json edges = Json::array();
    for (const auto& [i, k] : model.edge_list()) {
        Json atoms = Json::array();
        for (const auto& c : model.edge(i, k)) atoms.push_back(Json{{"w", c.w}, {"a", c.a}, {"b", c.b}});
        edges.push_back(Json{{"from", model.label(i)}, {"to", model.label(k)}, {"atoms", atoms}});
    }
    Json out{{"states", states}, {"transition", transition}, {"edges", edges}};
    if (z0) out["initial_law"] = initial_law_to_json(*z0);
    return out;
}

// ---------------------------------------------------------------------------
// Generator specs

inline bool is_generator_spec(const Json& j) { return j.is_object() && j.contains("generator"); }

inline FlowerParams flower_from_json(const Json& j) {
    if (!is_generator_spec(j) || j.at("generator") != "flower")
        throw Error(ErrorCode::ParseError, "only the 'flower' generator is known");
    FlowerParams p;
    if (j.contains("p_stay")) p.p_stay = to_double(j.at("p_stay"));
    if (j.contains("petals")) p.petals = j.at("petals").get<std::string>();
    return p;
}

inline Json flower_to_json(const FlowerParams& p) {
    return Json{{"generator", "flower"}, {"petals", p.petals}, {"p_stay", p.p_stay}};
}

} // namespace perpetua::io
