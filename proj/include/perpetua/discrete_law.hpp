#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace perpetua {

inline constexpr double kMergeTol = 1e-12;

struct Atom {
    double v = 0.0;
    double m = 0.0;
};

// Two values count as equal when they differ by at most tol, scaled up for
// magnitudes above one.
inline bool values_close(double x, double y, double tol) {
    if (x == y) return true;
    return std::abs(x - y) <= tol * std::max(1.0, std::max(std::abs(x), std::abs(y)));
}

// A finitely supported measure on the real line: atoms sorted by value,
// merged within a tolerance, plus an optional tail mass that was not
// resolved into atoms.
class DiscreteLaw {
public:
    DiscreteLaw() = default;

    static DiscreteLaw point(double v) {
        DiscreteLaw law;
        law.atoms_.push_back({v, 1.0});
        return law;
    }

    static DiscreteLaw from_atoms(std::vector<Atom> atoms, double tol = kMergeTol, double tail = 0.0) {
        DiscreteLaw law;
        law.atoms_ = std::move(atoms);
        law.tail_ = tail;
        law.normalize(tol);
        return law;
    }

    static DiscreteLaw from_samples(const std::vector<double>& samples, double tol = kMergeTol) {
        std::vector<Atom> atoms;
        atoms.reserve(samples.size());
        const double m = samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size());
        for (double x : samples) atoms.push_back({x, m});
        return from_atoms(std::move(atoms), tol);
    }

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    bool empty() const noexcept { return atoms_.empty(); }

    double tail_mass() const noexcept { return tail_; }
    void set_tail_mass(double t) noexcept { tail_ = t; }

    double atom_mass() const {
        double s = 0.0;
        for (const auto& a : atoms_) s += a.m;
        return s;
    }

    double mean() const {
        double s = 0.0, w = 0.0;
        for (const auto& a : atoms_) {
            s += a.v * a.m;
            w += a.m;
        }
        return w > 0.0 ? s / w : 0.0;
    }

    // P(X <= x) over the atom part.
    double cdf(double x) const {
        double s = 0.0;
        for (const auto& a : atoms_) {
            if (a.v > x) break;
            s += a.m;
        }
        return s;
    }

    double mass_near(double x, double tol) const {
        double s = 0.0;
        for (const auto& a : atoms_)
            if (std::abs(a.v - x) <= tol) s += a.m;
        return s;
    }

    double min_value() const { return atoms_.empty() ? 0.0 : atoms_.front().v; }
    double max_value() const { return atoms_.empty() ? 0.0 : atoms_.back().v; }

    bool is_point_mass(double tol = kMergeTol) const {
        if (atoms_.empty()) return false;
        return values_close(atoms_.front().v, atoms_.back().v, tol);
    }

    // Law of slope * X + intercept.
    DiscreteLaw affine(double slope, double intercept, double tol = kMergeTol) const {
        std::vector<Atom> out;
        out.reserve(atoms_.size());
        for (const auto& a : atoms_) out.push_back({slope * a.v + intercept, a.m});
        return from_atoms(std::move(out), tol, tail_);
    }

    DiscreteLaw reflected(double tol = kMergeTol) const { return affine(-1.0, 0.0, tol); }

    // Half the law of X plus half the law of -X.
    DiscreteLaw symmetrized(double tol = kMergeTol) const {
        std::vector<Atom> out;
        out.reserve(2 * atoms_.size());
        for (const auto& a : atoms_) {
            out.push_back({a.v, 0.5 * a.m});
            out.push_back({-a.v, 0.5 * a.m});
        }
        return from_atoms(std::move(out), tol, tail_);
    }

    DiscreteLaw scaled(double k) const {
        DiscreteLaw law = *this;
        for (auto& a : law.atoms_) a.m *= k;
        law.tail_ *= k;
        return law;
    }

    static DiscreteLaw mixture(const std::vector<std::pair<double, DiscreteLaw>>& parts,
                               double tol = kMergeTol) {
        std::vector<Atom> out;
        double tail = 0.0;
        for (const auto& [w, law] : parts) {
            for (const auto& a : law.atoms_) out.push_back({a.v, w * a.m});
            tail += w * law.tail_;
        }
        return from_atoms(std::move(out), tol, tail);
    }

    // Mean-preserving projection onto the grid h*Z: each atom splits its
    // mass between the two neighbouring grid points.
    DiscreteLaw grid_projected(double h) const {
        std::vector<Atom> out;
        out.reserve(2 * atoms_.size());
        for (const auto& a : atoms_) {
            const double k = std::floor(a.v / h);
            const double lo = k * h;
            const double theta = (a.v - lo) / h;
            if (theta <= 0.0) {
                out.push_back({lo, a.m});
            } else {
                out.push_back({lo, a.m * (1.0 - theta)});
                out.push_back({lo + h, a.m * theta});
            }
        }
        return from_atoms(std::move(out), 0.0, tail_);
    }

    friend bool operator==(const DiscreteLaw& x, const DiscreteLaw& y) {
        if (x.atoms_.size() != y.atoms_.size() || x.tail_ != y.tail_) return false;
        for (std::size_t k = 0; k < x.atoms_.size(); ++k)
            if (x.atoms_[k].v != y.atoms_[k].v || x.atoms_[k].m != y.atoms_[k].m) return false;
        return true;
    }

private:
    void normalize(double tol) {
        std::erase_if(atoms_, [](const Atom& a) { return !(a.m > 0.0); });
        std::sort(atoms_.begin(), atoms_.end(), [](const Atom& x, const Atom& y) { return x.v < y.v; });
        std::vector<Atom> merged;
        merged.reserve(atoms_.size());
        double anchor = 0.0;
        for (const auto& a : atoms_) {
            if (!merged.empty() && values_close(anchor, a.v, tol)) {
                merged.back().m += a.m;
            } else {
                merged.push_back(a);
                anchor = a.v;
            }
        }
        atoms_ = std::move(merged);
    }

    std::vector<Atom> atoms_;
    double tail_ = 0.0;
};

// sup_x |F(x) - G(x)|, with both CDFs evaluated at atom + tol so that atoms
// closer than tol are not told apart.
inline double ks_distance(const DiscreteLaw& f, const DiscreteLaw& g, double tol = 0.0) {
    std::vector<double> points;
    points.reserve(f.size() + g.size());
    for (const auto& a : f.atoms()) points.push_back(a.v + tol);
    for (const auto& a : g.atoms()) points.push_back(a.v + tol);
    std::sort(points.begin(), points.end());
    double best = 0.0, cf = 0.0, cg = 0.0;
    std::size_t i = 0, j = 0;
    const auto& fa = f.atoms();
    const auto& ga = g.atoms();
    for (double x : points) {
        while (i < fa.size() && fa[i].v <= x) cf += fa[i++].m;
        while (j < ga.size() && ga[j].v <= x) cg += ga[j++].m;
        best = std::max(best, std::abs(cf - cg));
    }
    return best;
}

// Total variation after matching atoms that agree within tol.
inline double tv_distance(const DiscreteLaw& f, const DiscreteLaw& g, double tol = kMergeTol) {
    std::vector<Atom> joint;
    joint.reserve(f.size() + g.size());
    for (const auto& a : f.atoms()) joint.push_back({a.v, a.m});
    for (const auto& a : g.atoms()) joint.push_back({a.v, -a.m});
    std::sort(joint.begin(), joint.end(), [](const Atom& x, const Atom& y) { return x.v < y.v; });
    double total = 0.0, group = 0.0, anchor = 0.0;
    bool open = false;
    for (const auto& a : joint) {
        if (open && std::abs(a.v - anchor) <= tol) {
            group += a.m;
        } else {
            total += std::abs(group);
            group = a.m;
            anchor = a.v;
            open = true;
        }
    }
    total += std::abs(group);
    return 0.5 * total;
}

// Wasserstein-1 distance: the integral of |F - G|.
inline double w1_distance(const DiscreteLaw& f, const DiscreteLaw& g) {
    const auto& fa = f.atoms();
    const auto& ga = g.atoms();
    std::size_t i = 0, j = 0;
    double cf = 0.0, cg = 0.0, total = 0.0, x_prev = 0.0;
    bool started = false;
    while (i < fa.size() || j < ga.size()) {
        double x;
        if (j >= ga.size() || (i < fa.size() && fa[i].v <= ga[j].v)) x = fa[i].v;
        else x = ga[j].v;
        if (started) total += std::abs(cf - cg) * (x - x_prev);
        while (i < fa.size() && fa[i].v == x) cf += fa[i++].m;
        while (j < ga.size() && ga[j].v == x) cg += ga[j++].m;
        x_prev = x;
        started = true;
    }
    return total;
}

} // namespace perpetua
