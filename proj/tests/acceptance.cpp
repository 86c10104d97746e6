#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "perpetua/perpetua.hpp"
#include "test_support.hpp"

using namespace perpetua;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

const DiscreteLaw& acceptance_z0() {
    static const DiscreteLaw z = DiscreteLaw::from_atoms({{-1.0, 0.3}, {2.0, 0.7}});
    return z;
}

std::vector<Model> random_models() {
    std::vector<Model> out;
    for (std::uint64_t seed = 101; seed <= 110; ++seed) out.push_back(testing::random_model(seed));
    return out;
}

// Every return product is +1: a_ij = sigma_i sigma_j h_j / h_i.
Model random_unit_product(std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    ModelSpec s = testing::random_spec(seed);
    std::vector<double> h(s.size());
    std::vector<int> sg(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        h[i] = u(g);
        sg[i] = g() % 2 ? 1 : -1;
    }
    for (auto& [e, law] : s.edges) {
        const double a = sg[e.first] * sg[e.second] * h[e.second] / h[e.first];
        for (auto& atom : law.atoms) atom.a = a;
    }
    return Model::validate(s);
}

std::vector<double> random_c(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 g(seed * 31 + 7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<double> c(n);
    for (auto& x : c) x = u(g);
    return c;
}

Outcome oracle_equivalence() {
    double worst = 0.0;
    std::size_t checks = 0;
    std::uint64_t seed = 1;
    for (const auto& m : random_models()) {
        const auto z = InitialLaw::constant(acceptance_z0(), m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            const SimOptions opt{1'000'000, seed++, 0};
            worst = std::max(worst, ks_distance(run_backward(m, i, 5, z, opt).law(), enumerate_backward(m, i, 5, z), 1e-9));
            worst = std::max(worst, ks_distance(run_forward(m, i, 5, z, opt).law(), enumerate_forward(m, i, 5, z), 1e-9));
            checks += 2;
        }
    }
    return {worst <= 0.005, "max KS " + fmt("%.5f", worst) + " over " + std::to_string(checks) + " comparisons (bound 0.005)"};
}

Outcome duality_identity() {
    double worst_v = 0.0, worst_m = 0.0;
    bool shapes = true;
    for (const auto& m : random_models()) {
        const auto z = InitialLaw::constant(acceptance_z0(), m.size());
        const auto d = dual(m);
        for (std::size_t n = 1; n <= 6; ++n) {
            const auto f = DiscreteLaw::from_atoms(enumerate_forward_stationary(m, n, z).atoms(), 1e-10);
            const auto b = DiscreteLaw::from_atoms(enumerate_backward_stationary(d, n, z).atoms(), 1e-10);
            if (f.size() != b.size()) {
                shapes = false;
                continue;
            }
            for (std::size_t k = 0; k < f.size(); ++k) {
                worst_v = std::max(worst_v, std::abs(f.atoms()[k].v - b.atoms()[k].v) / std::max(1.0, std::abs(f.atoms()[k].v)));
                worst_m = std::max(worst_m, std::abs(f.atoms()[k].m - b.atoms()[k].m));
            }
        }
    }
    const bool pass = shapes && worst_v <= 1e-10 && worst_m <= 1e-10;
    return {pass, std::string(shapes ? "atom counts agree" : "atom counts differ") + ", max value gap " + fmt("%.2e", worst_v) +
                      ", max mass gap " + fmt("%.2e", worst_m) + " (n <= 6, 10 models)"};
}

Outcome degeneracy_recovery() {
    double worst = 0.0, worst_dual = 0.0;
    int ok = 0, ok_dual = 0, total = 0;
    for (std::uint64_t seed = 201; seed <= 220; ++seed) {
        const bool family = seed > 216;
        const Model base = family ? random_unit_product(seed) : testing::random_model(seed);
        const auto c = random_c(seed, base.size());
        ++total;
        const auto r = detect(testing::plant(base, c));
        const auto expected = family ? DegeneracyStatus::CFamily : DegeneracyStatus::UniqueC;
        if (r.status == expected) {
            const auto got = r.member(c[r.reference]);
            double err = 0.0;
            for (std::size_t i = 0; i < c.size(); ++i) err = std::max(err, std::abs(got[i] - c[i]));
            worst = std::max(worst, err);
            ok += err <= 1e-9;
        }
        const auto d = detect_dual(testing::plant(base, c, true));
        if (d.status == expected) {
            const auto got = d.member(c[d.reference]);
            double err = 0.0;
            for (std::size_t i = 0; i < c.size(); ++i) err = std::max(err, std::abs(got[i] - c[i]));
            worst_dual = std::max(worst_dual, err);
            ok_dual += err <= 1e-9;
        }
    }
    return {ok == total && ok_dual == total, std::to_string(ok) + "/" + std::to_string(total) + " backward, " + std::to_string(ok_dual) + "/" +
                                                 std::to_string(total) + " dual recovered; max error " + fmt("%.2e", worst) + " / " +
                                                 fmt("%.2e", worst_dual) + " (4 unit-product families, gauge pinned)"};
}

Outcome example_end_to_end() {
    const auto m = Model::validate(builtin::grincevicius4());
    const auto r = detect(m);
    const std::vector<double> c{0.0, 1.0, 2.0 / 3.0, 1.0};
    double err = r.status == DegeneracyStatus::UniqueC ? 0.0 : 1.0;
    for (std::size_t i = 0; i < 4 && r.degenerate(); ++i) err = std::max(err, std::abs(r.c[i] - c[i]));
    const bool bzero = b_excursion_zero_test(m, 0);
    const bool t1 = embedded_trichotomy(m, 0).tag == EmbeddedTag::T1p;
    const auto z0 = InitialLaw::point(0.0, 4);
    const auto l = backward_limit(m, 0, z0);
    const bool point = std::holds_alternative<PointMassVector>(l.value) && l.law() && std::abs(l.law()->atoms().front().v) <= 1e-9;
    const auto sim = run_backward(m, 0, 200, z0, {1'000'000, 4, 0});
    const double mass = sim.law().mass_near(0.0, 1e-6);
    const bool pass = err <= 1e-9 && bzero && t1 && point && std::abs(mass - 1.0) <= 1e-6;
    return {pass, "c error " + fmt("%.1e", err) + ", B^0 = 0 " + (bzero ? "certified" : "not certified") + ", tag " +
                      to_string(embedded_trichotomy(m, 0).tag) + ", limit " + l.case_tag + ", empirical mass within 1e-6 of 0 at n=200: " +
                      fmt("%.7f", mass)};
}

Outcome one_state_trichotomy() {
    const auto half = Model::validate(builtin::onestate_half());
    const bool t1 = embedded_trichotomy(half).tag == EmbeddedTag::T1p;
    const auto lh = backward_limit(half, 0, InitialLaw::point(0.0, 1));
    const bool exact2 = lh.law() && *lh.law() == DiscreteLaw::point(2.0);
    const auto ex = Model::validate(builtin::onestate_expanding());
    const bool t3 = embedded_trichotomy(ex).tag == EmbeddedTag::T3p;
    const auto fp = fixed_point_classify(ex);
    const bool c4 = fp.fp_case == FixedPointCase::C4 && fp.unique && fp.representative()[0] == DiscreteLaw::point(1.0);
    const auto l = backward_limit(ex, 0, InitialLaw::point(0.0, 1));
    const bool diverges = std::holds_alternative<DivergesToInfinity>(l.value);
    const double within = run_backward(ex, 0, 100, InitialLaw::point(0.0, 1), {100'000, 5, 0}).fraction_within(10.0);
    const bool pass = t1 && exact2 && t3 && c4 && diverges && within < 0.05;
    return {pass, std::string("a=1/2: ") + (t1 ? "T1p" : "not T1p") + (exact2 ? ", limit delta_2" : ", limit wrong") +
                      "; a=2,b=-1: " + (t3 ? "T3p" : "not T3p") + (c4 ? ", unique fixed point delta_1" : ", fixed point wrong") +
                      ", limit " + l.case_tag + ", P(|Z_100| <= 10) = " + fmt("%.4f", within)};
}

Outcome ergodic_mixture() {
    const auto m = Model::validate(builtin::onestate_sign());
    const auto z0 = InitialLaw::point(0.0, 1);
    const auto l = backward_limit(m, 0, z0);
    const bool mixture = std::holds_alternative<ErgodicMixture>(l.value);
    const DiscreteLaw claim = l.law().value_or(DiscreteLaw::point(0.0));
    const double formula = tv_distance(claim, DiscreteLaw::from_atoms({{0.0, 0.5}, {2.0, 0.5}}));
    const double tv = tv_distance(run_backward(m, 0, 10'000, z0, {1'000'000, 6, 0}).law(), claim, 1e-9);
    return {mixture && formula <= 1e-12 && tv <= 0.01,
            "claimed " + l.case_tag + " (TV to 1/2 delta_0 + 1/2 delta_2: " + fmt("%.1e", formula) + "), empirical TV at n=1e4: " + fmt("%.4f", tv)};
}

Outcome periodic_gate() {
    const auto m = Model::validate(builtin::onestate_flip());
    const auto sym = InitialLaw::constant(DiscreteLaw::from_atoms({{2.0, 0.5}, {4.0, 0.5}}), 1);
    const auto l = backward_limit(m, 0, sym);
    const DiscreteLaw expect = DiscreteLaw::from_atoms({{2.0, 0.5}, {4.0, 0.5}});
    const bool law_ok = l.law() && tv_distance(*l.law(), expect) <= 1e-12;
    double tv_sym = 0.0;
    for (std::size_t n : {200u, 201u}) tv_sym = std::max(tv_sym, tv_distance(run_backward(m, 0, n, sym, {100'000, 7, 0}).law(), expect, 1e-9));
    const auto pt = InitialLaw::point(4.0, 1);
    const auto nl = backward_limit(m, 0, pt);
    const bool no_limit = std::holds_alternative<NoLimit>(nl.value);
    const double tv_gap = tv_distance(run_backward(m, 0, 200, pt, {100'000, 8, 0}).law(), run_backward(m, 0, 201, pt, {100'000, 9, 0}).law(), 1e-9);
    return {law_ok && tv_sym <= 0.01 && no_limit && tv_gap >= 0.9,
            "symmetric z0: " + l.case_tag + ", empirical TV " + fmt("%.4f", tv_sym) + "; z0 = delta_4: " + nl.case_tag +
                ", even/odd TV " + fmt("%.4f", tv_gap)};
}

Model contracting_three_state() {
    ModelSpec s(3);
    s.set_p(0, 0, 0.3).set_p(0, 1, 0.7).set_p(1, 2, 0.6).set_p(1, 0, 0.4).set_p(2, 0, 1.0);
    s.add_atom(0, 0, 0.5, 0.3, 1.0).add_atom(0, 0, 0.5, -0.4, -1.0);
    s.add_atom(0, 1, 0.3, 0.5, 0.5).add_atom(0, 1, 0.7, 0.2, 2.0);
    s.add_atom(1, 2, 1.0, -0.45, 1.5);
    s.add_atom(1, 0, 0.6, 0.25, -2.0).add_atom(1, 0, 0.4, 0.5, 0.0);
    s.add_atom(2, 0, 0.5, 0.4, 3.0).add_atom(2, 0, 0.25, -0.3, -1.0).add_atom(2, 0, 0.25, 0.1, 0.5);
    return Model::validate(s);
}

Outcome fixed_point_cases() {
    const auto x = DiscreteLaw::from_atoms({{-2.0, 0.25}, {-0.5, 0.25}, {0.5, 0.25}, {2.0, 0.25}});
    const auto skew = DiscreteLaw::from_atoms({{0.0, 0.2}, {1.0, 0.5}, {7.0, 0.3}});
    const Model c1 = Model::validate(builtin::grincevicius4());
    const Model c2 = Model::validate(ModelSpec(1).edge(0, 0, 1.0, -1.0, 6.0));
    const Model c3 = testing::plant(random_unit_product(301), random_c(301, random_unit_product(301).size()));
    const Model c4 = Model::validate(builtin::onestate_expanding());
    std::ostringstream os;
    bool pass = true;
    const std::vector<std::tuple<const Model*, DiscreteLaw, FixedPointCase>> cases{
        {&c1, x, FixedPointCase::C1}, {&c2, x, FixedPointCase::C2}, {&c3, skew, FixedPointCase::C3}, {&c4, x, FixedPointCase::C4}};
    for (const auto& [m, law, expect] : cases) {
        const auto r = fixed_point_classify(*m);
        const auto k = r.representative(law);
        const double res = kernel_distance(psi_apply(*m, k), k);
        pass = pass && r.fp_case == expect && res <= 1e-9;
        os << to_string(r.fp_case) << " W1 " << fmt("%.1e", res) << "; ";
    }
    const auto m = contracting_three_state();
    const double tol = 1e-6;
    try {
        const auto a = fixed_point_solve(m, Kernel(3, DiscreteLaw::point(0.0)), 200, tol, std::size_t{1} << 16);
        const auto b = fixed_point_solve(m, Kernel(3, DiscreteLaw::point(5.0)), 200, tol, std::size_t{1} << 16);
        const double gap = kernel_distance(a.kernel, b.kernel);
        pass = pass && gap <= 2.0 * tol;
        os << "solver from delta_0 / delta_5: " << a.iterations << " / " << b.iterations << " iterations, W1 gap " << fmt("%.2e", gap);
    } catch (const Error& e) {
        pass = false;
        os << "solver failed: " << e.what();
    }
    return {pass, os.str()};
}

Outcome flower_separation() {
    const auto gen = flower_generator({0.5, "geometric:0.5"});
    bool exact = true, unbounded = true;
    double min_max_log = std::numeric_limits<double>::infinity();
    std::size_t returns = 0;
    const int runs = 20;
    for (int run = 0; run < runs; ++run) {
        std::int64_t petals = 0;
        double max_log = -std::numeric_limits<double>::infinity();
        walk(gen, gen.start, 1'000'000, 9, static_cast<std::uint64_t>(run),
             [&](std::uint64_t, std::uint64_t prev, const GeneratorStep& st, const LogProduct& p) {
                 max_log = std::max(max_log, p.log_abs());
                 if (st.next != 0) return;
                 if (prev != 0) ++petals;
                 ++returns;
                 exact = exact && p.sign == 1 && p.ln == 0.0 && p.pow2 == -petals;
             });
        unbounded = unbounded && max_log > std::log(1e6);
        min_max_log = std::min(min_max_log, max_log);
    }
    return {exact && unbounded, std::to_string(runs) + " runs of 1e6 steps, " + std::to_string(returns) + " returns; Pi at returns " +
                                    (exact ? "always 2^-#petals" : "MISMATCH") + "; smallest running max of log Pi_n " + fmt("%.3g", min_max_log) +
                                    " (needs > " + fmt("%.3f", std::log(1e6)) + ")"};
}

std::vector<Model> zero_mean_models() {
    std::vector<Model> out;
    auto one = [](std::vector<std::tuple<double, double>> atoms) {
        ModelSpec s(1);
        s.set_p(0, 0, 1.0);
        for (const auto& [w, a] : atoms) s.add_atom(0, 0, w, a, 1.0);
        return Model::validate(s);
    };
    const double e = std::exp(1.0);
    out.push_back(one({{0.5, 2.0}, {0.5, 0.5}}));
    out.push_back(one({{1.0 / 3.0, e}, {2.0 / 3.0, -std::exp(-0.5)}}));
    out.push_back(one({{1.0 / 3.0, 1.0 / e}, {1.0 / 3.0, -1.0}, {1.0 / 3.0, e}}));
    {
        ModelSpec s(2);
        s.set_p(0, 0, 0.5).set_p(0, 1, 0.5).set_p(1, 0, 0.5).set_p(1, 1, 0.5);
        s.add_atom(0, 1, 1.0, std::exp(0.7), 1.0).add_atom(1, 0, 1.0, std::exp(-0.7), 1.0);
        s.add_atom(0, 0, 0.5, std::exp(0.3), 1.0).add_atom(0, 0, 0.5, std::exp(-0.3), 0.0);
        s.add_atom(1, 1, 0.5, -std::exp(0.3), 1.0).add_atom(1, 1, 0.5, std::exp(-0.3), 2.0);
        out.push_back(Model::validate(s));
    }
    {
        ModelSpec s(3);
        s.set_p(0, 0, 0.5).set_p(0, 1, 0.5).set_p(1, 2, 1.0).set_p(2, 0, 1.0);
        s.add_atom(0, 0, 0.5, std::exp(0.5), 1.0).add_atom(0, 0, 0.5, std::exp(-0.5), 1.0);
        s.add_atom(0, 1, 1.0, e, 1.0).add_atom(1, 2, 1.0, -e, 0.5).add_atom(2, 0, 1.0, std::exp(-2.0), 1.0);
        out.push_back(Model::validate(s));
    }
    return out;
}

Outcome divergence_diagnostic_check() {
    bool pass = true;
    std::ostringstream os;
    int k = 0;
    for (const auto& m : zero_mean_models()) {
        const double drift = stationary_log_drift(m);
        const bool nh = null_homology(m).null_homologous;
        const auto r = divergence_diagnostic(m, {100, 1000, 10000}, 20000, 1000 + k, 1.0);
        pass = pass && std::abs(drift) < 1e-12 && !nh && r.strictly_decreasing && r.prob_within.back() < 0.2;
        os << "model " << ++k << ": " << fmt("%.3f", r.prob_within[0]) << " > " << fmt("%.3f", r.prob_within[1]) << " > "
           << fmt("%.3f", r.prob_within[2]) << "; ";
    }
    return {pass, os.str()};
}

Outcome trivial_regimes() {
    const auto killed = Model::validate(builtin::killed());
    LimitOptions lo;
    lo.samples = 1'000'000;
    lo.seed = 11;
    const auto l = backward_limit(killed, 0, InitialLaw::point(0.0, 1), lo);
    std::vector<Atom> geo;
    for (int k = 1; k <= 80; ++k) geo.push_back({static_cast<double>(k), std::ldexp(1.0, -k)});
    const double ks = l.law() ? ks_distance(*l.law(), DiscreteLaw::from_atoms(geo)) : 1.0;
    const auto reflect = Model::validate(builtin::onestate_reflect());
    const double z = 1.5;
    const auto occ = backward_limit(reflect, 0, InitialLaw::point(z, 1));
    const DiscreteLaw expect = DiscreteLaw::from_atoms({{-z, 0.5}, {z, 0.5}});
    const bool formula = occ.law() && tv_distance(*occ.law(), expect) <= 1e-12;
    const double tv = occ.law() ? tv_distance(backward_time_average(reflect, 0, z, 1'000'000, 12), *occ.law(), 1e-9) : 1.0;
    return {ks <= 0.005 && formula && tv <= 0.01, "stopped sum " + l.case_tag + " KS to geometric(1/2) " + fmt("%.5f", ks) + "; B = 0 " +
                                                      occ.case_tag + " TV to time average " + fmt("%.5f", tv)};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double budget_seconds;
    };
    const std::vector<Criterion> criteria{{"oracle equivalence", oracle_equivalence, 120.0},
                                          {"duality identity", duality_identity, 0.0},
                                          {"degeneracy recovery", degeneracy_recovery, 0.0},
                                          {"four-state example end to end", example_end_to_end, 0.0},
                                          {"one-state trichotomy", one_state_trichotomy, 0.0},
                                          {"ergodic mixture formula", ergodic_mixture, 0.0},
                                          {"two-periodic gate", periodic_gate, 0.0},
                                          {"fixed-point cases", fixed_point_cases, 0.0},
                                          {"flower-chain separation", flower_separation, 60.0},
                                          {"divergence diagnostic", divergence_diagnostic_check, 0.0},
                                          {"trivial regimes", trivial_regimes, 0.0}};
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (criteria[k].budget_seconds > 0.0 && secs > criteria[k].budget_seconds) {
            o.pass = false;
            o.detail += "; over the " + fmt("%.0f", criteria[k].budget_seconds) + " s budget";
        }
        failed += !o.pass;
        std::printf("%s  criterion %2zu  %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
