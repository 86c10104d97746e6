#pragma once

#include <string>
#include <vector>

#include "perpetua/error.hpp"
#include "perpetua/model.hpp"

namespace perpetua::builtin {

// Four states; every return to 0 composes to an affine map with intercept 0,
// while the other states have nonzero return intercepts.
inline ModelSpec grincevicius4(double p01 = 0.5) {
    ModelSpec s(4);
    s.edge(0, 1, p01, -1.0, 1.0);
    s.edge(0, 2, 1.0 - p01, -1.5, 1.0);
    s.edge(1, 0, 1.0, 1.0, 1.0);
    s.edge(2, 3, 1.0, -1.0 / 3.0, 1.0);
    s.edge(3, 0, 1.0, 1.0, 1.0);
    return s;
}

// Z -> Z/2 + 1; the perpetuity is the constant 2.
inline ModelSpec onestate_half() { return ModelSpec(1).edge(0, 0, 1.0, 0.5, 1.0); }

// A = +-1 with equal weights and B = 1 - A; every fixed target is 1.
inline ModelSpec onestate_sign() {
    ModelSpec s(1);
    s.set_p(0, 0, 1.0);
    s.add_atom(0, 0, 0.5, 1.0, 0.0);
    s.add_atom(0, 0, 0.5, -1.0, 2.0);
    return s;
}

// Z -> 6 - Z, a reflection about 3.
inline ModelSpec onestate_flip() { return ModelSpec(1).edge(0, 0, 1.0, -1.0, 6.0); }

// Z -> 2Z - 1 with the repelling fixed point 1.
inline ModelSpec onestate_expanding() { return ModelSpec(1).edge(0, 0, 1.0, 2.0, -1.0); }

// A = 0 or 1 with equal weights and B = 1; the stopped sum is geometric.
inline ModelSpec killed() {
    ModelSpec s(1);
    s.set_p(0, 0, 1.0);
    s.add_atom(0, 0, 0.5, 0.0, 1.0);
    s.add_atom(0, 0, 0.5, 1.0, 1.0);
    return s;
}

// A = +-1 with equal weights and B = 0.
inline ModelSpec onestate_reflect() {
    ModelSpec s(1);
    s.set_p(0, 0, 1.0);
    s.add_atom(0, 0, 0.5, 1.0, 0.0);
    s.add_atom(0, 0, 0.5, -1.0, 0.0);
    return s;
}

inline const std::vector<std::string>& names() {
    static const std::vector<std::string> n{"grincevicius4", "onestate_half",      "onestate_sign", "onestate_flip",
                                            "onestate_expanding", "killed", "onestate_reflect"};
    return n;
}

inline ModelSpec by_name(const std::string& name) {
    if (name == "grincevicius4") return grincevicius4();
    if (name == "onestate_half") return onestate_half();
    if (name == "onestate_sign") return onestate_sign();
    if (name == "onestate_flip") return onestate_flip();
    if (name == "onestate_expanding") return onestate_expanding();
    if (name == "killed") return killed();
    if (name == "onestate_reflect") return onestate_reflect();
    throw Error(ErrorCode::ParseError, "unknown built-in model '" + name + "'");
}

} // namespace perpetua::builtin
