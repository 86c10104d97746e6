#include <iostream>

#include "perpetua/perpetua.hpp"

using namespace perpetua;

int main() {
    const Model m = Model::validate(builtin::grincevicius4());
    std::cout << "stationary law:";
    for (double p : m.pi()) std::cout << ' ' << p;
    std::cout << "\n";

    const auto cls = classify(m, 0);
    std::cout << "embedded tag: " << to_string(cls.embedded.tag) << ", E_pi log|A| = " << cls.embedded.evidence.log_drift << "\n";

    const auto deg = detect(m);
    std::cout << "degeneracy: " << to_string(deg.status) << ", c =";
    for (double c : deg.c) std::cout << ' ' << c;
    std::cout << "\n";

    const auto z0 = InitialLaw::point(0.0, m.size());
    const auto lim = backward_limit(m, 0, z0);
    std::cout << "backward limit under P_0: " << report::limit(lim, m).dump() << "\n";

    const auto check = validate_limit(m, z0, lim, 20000, 1);
    std::cout << "simulation check: " << report::validation(check).dump() << "\n";
}
