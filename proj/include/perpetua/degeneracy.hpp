#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "perpetua/error.hpp"
#include "perpetua/homology.hpp"
#include "perpetua/model.hpp"
#include "perpetua/oracle.hpp"

namespace perpetua {

struct AffineMap {
    double slope = 1.0;
    double intercept = 0.0;

    double operator()(double x) const { return slope * x + intercept; }

    // (this ∘ inner)(x) = this(inner(x)).
    AffineMap after(const AffineMap& inner) const { return {slope * inner.slope, slope * inner.intercept + intercept}; }

    AffineMap inverse() const { return {1.0 / slope, -intercept / slope}; }

    bool close_to(const AffineMap& other, double tol) const {
        const auto near = [tol](double x, double y) { return std::abs(x - y) <= tol * std::max({1.0, std::abs(x), std::abs(y)}); };
        return near(slope, other.slope) && near(intercept, other.intercept);
    }
};

enum class DegeneracyStatus { NonDegenerate, UniqueC, CFamily };

inline std::string to_string(DegeneracyStatus s) {
    switch (s) {
    case DegeneracyStatus::NonDegenerate: return "non_degenerate";
    case DegeneracyStatus::UniqueC: return "degenerate_unique_c";
    case DegeneracyStatus::CFamily: return "degenerate_c_family";
    }
    return "?";
}

struct DegeneracyWitness {
    std::size_t from = 0;
    std::size_t to = 0;
    std::size_t atom = 0;
    double residual = 0.0;
    std::string reason;
};

// Backward form: a c_j + b = c_i on every atom of every edge (i, j).
// Dual form:     a c_i + b = c_j.
struct DegeneracyReport {
    DegeneracyStatus status = DegeneracyStatus::NonDegenerate;
    bool dual_form = false;
    std::vector<double> c;  // the unique solution, or the family member with c_reference = base
    std::size_t reference = 0;
    double base = 0.0;
    std::vector<AffineMap> to_reference;  // family case: c_i = to_reference[i](c_reference)
    std::optional<DegeneracyWitness> witness;
    double max_residual = 0.0;

    bool degenerate() const { return status != DegeneracyStatus::NonDegenerate; }

    // Family member with c_reference = x; the unique c otherwise.
    std::vector<double> member(double x) const {
        if (status != DegeneracyStatus::CFamily) return c;
        std::vector<double> out(to_reference.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_reference[i](x);
        return out;
    }

    // Phi_ij with c_i = Phi_ij(c_j) for every member of the family.
    AffineMap phi(std::size_t i, std::size_t j) const { return to_reference[i].after(to_reference[j].inverse()); }
};

namespace detail {

inline double scaled_residual(double lhs, double rhs, double scale) { return std::abs(lhs - rhs) / std::max(1.0, scale); }

inline DegeneracyReport detect_family(const Model& model, bool dual_form, double tol) {
    const std::size_t n = model.size();
    DegeneracyReport rep;
    rep.dual_form = dual_form;
    std::vector<std::optional<AffineMap>> F(n);
    F[0] = AffineMap{};
    std::deque<std::size_t> queue{0};
    // Backward: c_i = Psi_ij(c_j), so F_i = Psi_ij ∘ F_j. Dual: c_j = Psi_ij(c_i).
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v = 0; v < n; ++v) {
            if (F[v]) continue;
            if (!dual_form && model.p(v, u) > 0.0) {
                const auto& e = model.edge(v, u).front();
                F[v] = AffineMap{e.a, e.b}.after(*F[u]);
                queue.push_back(v);
            } else if (dual_form && model.p(u, v) > 0.0) {
                const auto& e = model.edge(u, v).front();
                F[v] = AffineMap{e.a, e.b}.after(*F[u]);
                queue.push_back(v);
            }
        }
    }
    rep.to_reference.resize(n);
    for (std::size_t i = 0; i < n; ++i) rep.to_reference[i] = *F[i];
    for (const auto& [i, j] : model.edge_list()) {
        const auto& law = model.edge(i, j);
        for (std::size_t k = 0; k < law.size(); ++k) {
            const AffineMap psi{law[k].a, law[k].b};
            const AffineMap lhs = dual_form ? *F[j] : *F[i];
            const AffineMap rhs = dual_form ? psi.after(*F[i]) : psi.after(*F[j]);
            const double res = std::max(std::abs(lhs.slope - rhs.slope), std::abs(lhs.intercept - rhs.intercept)) /
                               std::max({1.0, std::abs(lhs.intercept), std::abs(rhs.intercept)});
            rep.max_residual = std::max(rep.max_residual, res);
            if (!lhs.close_to(rhs, tol) && (!rep.witness || res > rep.witness->residual))
                rep.witness = DegeneracyWitness{i, j, k, res, "edge map disagrees with the path composition"};
        }
    }
    if (rep.witness) {
        rep.status = DegeneracyStatus::NonDegenerate;
        rep.to_reference.clear();
        return rep;
    }
    rep.status = DegeneracyStatus::CFamily;
    rep.reference = 0;
    rep.base = 0.0;
    rep.c = rep.member(0.0);
    return rep;
}

inline DegeneracyReport detect_unique(const Model& model, bool dual_form, double tol) {
    const std::size_t n = model.size();
    std::size_t rows = 0;
    for (const auto& [i, j] : model.edge_list()) rows += model.edge(i, j).size();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows));
    Eigen::Index r = 0;
    for (const auto& [i, j] : model.edge_list())
        for (const auto& e : model.edge(i, j)) {
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            if (!dual_form) {
                M(r, ii) += 1.0;
                M(r, jj) -= e.a;
                rhs(r) = e.b;
            } else {
                M(r, ii) += e.a;
                M(r, jj) -= 1.0;
                rhs(r) = -e.b;
            }
            ++r;
        }
    DegeneracyReport rep;
    rep.dual_form = dual_form;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    if (qr.rank() < static_cast<Eigen::Index>(n))
        throw Error(ErrorCode::SingularSystem, "degeneracy system is rank deficient outside the unit-product case");
    const Eigen::VectorXd c = qr.solve(rhs);
    rep.c.assign(c.data(), c.data() + c.size());
    for (const auto& [i, j] : model.edge_list()) {
        const auto& law = model.edge(i, j);
        for (std::size_t k = 0; k < law.size(); ++k) {
            const auto& e = law[k];
            const double lhs = dual_form ? rep.c[j] : rep.c[i];
            const double in = dual_form ? rep.c[i] : rep.c[j];
            const double rhs_v = e.a * in + e.b;
            const double res = scaled_residual(lhs, rhs_v, std::max({std::abs(lhs), std::abs(e.a * in), std::abs(e.b)}));
            rep.max_residual = std::max(rep.max_residual, res);
            if (res > tol && (!rep.witness || res > rep.witness->residual)) {
                std::string reason = law.size() > 1 ? "InconsistentAtoms: atoms of one edge force different constants"
                                                    : "edge equations admit no common solution";
                rep.witness = DegeneracyWitness{i, j, k, res, reason};
            }
        }
    }
    rep.status = rep.witness ? DegeneracyStatus::NonDegenerate : DegeneracyStatus::UniqueC;
    if (!rep.degenerate()) rep.c.clear();
    return rep;
}

inline DegeneracyReport detect_form(const Model& model, bool dual_form, double tol) {
    if (unit_excursion_products(model, tol)) return detect_family(model, dual_form, tol);
    return detect_unique(model, dual_form, tol);
}

} // namespace detail

// Constants with A_1 c_{M_1} + B_1 = c_{M_0} almost surely.
inline DegeneracyReport detect(const Model& model, double tol = kDegeneracyTol) { return detail::detect_form(model, false, tol); }

// Constants with A_1 c_{M_0} + B_1 = c_{M_1} almost surely.
inline DegeneracyReport detect_dual(const Model& model, double tol = kDegeneracyTol) { return detail::detect_form(model, true, tol); }

struct BZeroCertificate {
    bool value = false;
    std::string basis;
    std::optional<ExcursionAtom> witness;  // an excursion with B^i != 0 when value is false
};

// Decides P_i(B^i = 0) = 1. Since B^i = c_i (1 - A^i) for any degeneracy
// constants, the answer is yes exactly for the unit-product family or for a
// unique c with c_i = 0.
inline BZeroCertificate b_excursion_zero_certificate(const Model& model, std::size_t i, double tol = kDegeneracyTol,
                                                     std::size_t horizon = 12) {
    BZeroCertificate cert;
    const auto find_witness = [&]() -> std::optional<ExcursionAtom> {
        try {
            const auto law = excursion_law(model, i, horizon);
            for (const auto& x : law.atoms)
                if (std::abs(x.b) > tol) return x;
        } catch (const Error&) {
        }
        return std::nullopt;
    };
    if (check_standing_assumption(model).a_never_zero) {
        const auto rep = detect(model, tol);
        if (rep.status == DegeneracyStatus::CFamily) {
            cert.value = true;
            cert.basis = "A^i = 1 a.s. and the model is degenerate";
        } else if (rep.status == DegeneracyStatus::UniqueC && std::abs(rep.c[i]) <= tol) {
            cert.value = true;
            cert.basis = "degenerate with c_i = 0";
        } else {
            cert.value = false;
            cert.basis = rep.degenerate() ? "degenerate with c_i != 0 and P_i(A^i = 1) < 1" : "not degenerate";
            cert.witness = find_witness();
        }
        return cert;
    }
    const auto law = excursion_law(model, i, horizon);
    for (const auto& x : law.atoms)
        if (std::abs(x.b) > tol) {
            cert.value = false;
            cert.basis = "enumerated excursion with B^i != 0";
            cert.witness = x;
            return cert;
        }
    if (law.tail_mass > 0.0)
        throw Error(ErrorCode::Inconclusive, "all enumerated excursions have B^i = 0 but tail mass remains");
    cert.value = true;
    cert.basis = "every excursion enumerated with B^i = 0";
    return cert;
}

inline bool b_excursion_zero_test(const Model& model, std::size_t i, double tol = kDegeneracyTol) {
    return b_excursion_zero_certificate(model, i, tol).value;
}

} // namespace perpetua
