#include <gtest/gtest.h>

#include <cmath>

#include "perpetua/builtin_models.hpp"
#include "perpetua/classify.hpp"
#include "perpetua/homology.hpp"
#include "test_support.hpp"

using namespace perpetua;

namespace {

Model one_state(std::vector<std::pair<double, double>> atoms, double b = 1.0) {
    ModelSpec s(1);
    s.set_p(0, 0, 1.0);
    for (const auto& [w, a] : atoms) s.add_atom(0, 0, w, a, b);
    return Model::validate(s);
}

// a_ij = h(j) / h(i) on a 3-cycle with a self-loop at 0.
Model coboundary_cycle(double sign01 = 1.0, double sign12 = 1.0, double loop = 1.0) {
    const double h[3] = {1.0, 2.0, 3.0};
    ModelSpec s(3);
    s.edge(0, 0, 0.5, loop, 1.0).edge(0, 1, 0.5, sign01 * h[1] / h[0], 1.0);
    s.edge(1, 2, 1.0, sign12 * h[2] / h[1], -1.0).edge(2, 0, 1.0, sign01 * sign12 * h[0] / h[2], 0.5);
    return Model::validate(s);
}

// Signs follow sigma = (1, -1): sign(a_ij) = sigma_i sigma_j.
Model sign_homologous() {
    ModelSpec s(2);
    s.edge(0, 0, 0.4, 1.0, 1.0).edge(0, 1, 0.6, -2.0, 1.0).edge(1, 0, 0.7, -0.5, 1.0).edge(1, 1, 0.3, 1.0, 2.0);
    return Model::validate(s);
}

} // namespace

TEST(NullHomology, RecoversCoboundary) {
    const auto r = null_homology(coboundary_cycle());
    ASSERT_TRUE(r.null_homologous);
    const double h[3] = {1.0, 2.0, 3.0};
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.witness.g[i] - r.witness.g[0], -std::log(h[i]), 1e-12);
    ASSERT_TRUE(r.witness.sigma.has_value());
}

TEST(NullHomology, SignsWithoutHomologyDropSigma) {
    const auto r = null_homology(coboundary_cycle(1.0, 1.0, -1.0));
    ASSERT_TRUE(r.null_homologous);
    EXPECT_FALSE(r.witness.sigma.has_value());
    EXPECT_FALSE(unit_excursion_products(coboundary_cycle(1.0, 1.0, -1.0)));
}

TEST(NullHomology, RandomLogLawRejected) {
    const auto r = null_homology(one_state({{0.5, 0.5}, {0.5, 2.0}}));
    EXPECT_FALSE(r.null_homologous);
}

TEST(NullHomology, ExampleChainCycleViolation) {
    const auto r = null_homology(Model::validate(builtin::grincevicius4()));
    EXPECT_FALSE(r.null_homologous);
    ASSERT_TRUE(r.violation.has_value());
    EXPECT_NEAR(r.violation->abs_product, 0.5, 1e-12);
    EXPECT_EQ(r.violation->cycle.front(), r.violation->cycle.back());
}

TEST(Trichotomy, OneStateTags) {
    EXPECT_EQ(embedded_trichotomy(one_state({{1.0, 0.5}})).tag, EmbeddedTag::T1p);
    EXPECT_EQ(embedded_trichotomy(one_state({{1.0, -1.0}})).tag, EmbeddedTag::T2p);
    EXPECT_EQ(embedded_trichotomy(one_state({{1.0, 2.0}})).tag, EmbeddedTag::T3p);
    EXPECT_EQ(mrw_trichotomy(one_state({{1.0, 2.0}})).tag, MrwTag::T3);
    EXPECT_EQ(mrw_trichotomy(coboundary_cycle()).tag, MrwTag::T2);
    EXPECT_EQ(mrw_trichotomy(one_state({{1.0, 0.5}})).tag, MrwTag::T1);
}

TEST(Trichotomy, ExampleChainDrift) {
    const auto m = Model::validate(builtin::grincevicius4());
    const auto t = embedded_trichotomy(m);
    EXPECT_EQ(t.tag, EmbeddedTag::T1p);
    EXPECT_NEAR(t.evidence.log_drift, 0.2 * std::log(0.5), 1e-14);
}

TEST(Trichotomy, SolidarityAcrossStates) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto m = perpetua::testing::random_model(seed);
        const auto tag = embedded_trichotomy(m, 0).tag;
        for (std::size_t i = 1; i < m.size(); ++i) EXPECT_EQ(embedded_trichotomy(m, i).tag, tag);
    }
}

TEST(Trichotomy, ThreeRoutesToT2p) {
    std::vector<Model> models{coboundary_cycle(), coboundary_cycle(-1.0, 1.0), sign_homologous(),
                              Model::validate(builtin::onestate_flip()), Model::validate(builtin::grincevicius4())};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) models.push_back(perpetua::testing::random_model(seed));
    for (const auto& m : models) {
        const bool t2 = embedded_trichotomy(m).tag == EmbeddedTag::T2p;
        EXPECT_EQ(t2, null_homology(m).null_homologous);
        bool all_unit = true;
        for (const auto& x : sample_excursions(m, 0, 2000, 1).samples) all_unit = all_unit && std::abs(x.s_tau) < 1e-12;
        EXPECT_EQ(t2, all_unit);
    }
}

TEST(Trichotomy, ContractingReturnsVanish) {
    const auto m = perpetua::testing::random_model(3);
    ASSERT_EQ(embedded_trichotomy(m).tag, EmbeddedTag::T1p);
    const auto b = sample_excursions(m, 0, 5000, 2);
    double log_pi = 0.0;
    for (const auto& x : b.samples) log_pi -= x.s_tau;
    EXPECT_LT(log_pi, std::log(1e-10));
}

TEST(JFunction, Definition) {
    const auto half = one_state({{1.0, 0.5}});
    const auto j = j_function(half, 0);
    EXPECT_EQ(j(0.0), 1.0);
    EXPECT_NEAR(j(1.0), 1.0 / std::log(2.0), 1e-12);
    const auto grow = one_state({{1.0, 2.0}});
    EXPECT_EQ(j_function(grow, 0, 3.0), 3.0);
}

TEST(JFunction, NondecreasingAndEmpiricalAgrees) {
    const auto m = one_state({{0.5, 0.5}, {0.5, 1.5}});
    const auto exact = j_function(m, 0);
    const auto emp = j_function(sample_excursions(m, 0, 100000, 5));
    double prev = exact(0.0);
    for (double x = 0.1; x < 10.0; x += 0.1) {
        EXPECT_GE(exact(x) + 1e-12, prev);
        prev = exact(x);
        EXPECT_NEAR(emp(x), exact(x), 0.03 * exact(x));
    }
}

TEST(JMoment, FiniteForFiniteModels) {
    const auto m = perpetua::testing::random_model(2);
    EXPECT_TRUE(j_moment_test(m, 0, JTarget::W).finite);
    EXPECT_TRUE(j_moment_test(m, 0, JTarget::B).finite);
    EXPECT_THROW(j_moment_test(sample_excursions(m, 0, 5, 0), JTarget::W), Error);
}

TEST(HatTau, Periodicity) {
    EXPECT_TRUE(hat_tau_periodicity(one_state({{1.0, -1.0}}), 0).two_periodic);
    const auto mixed = hat_tau_periodicity(one_state({{0.5, -1.0}, {0.5, 1.0}}), 0);
    EXPECT_FALSE(mixed.two_periodic);
    EXPECT_NEAR(mixed.prob_plus_one, 0.5, 1e-14);
    EXPECT_FALSE(hat_tau_periodicity(one_state({{1.0, 1.0}}), 0).two_periodic);
}

TEST(SignChain, OneStateCases) {
    const auto mixed = augmented_sign_chain(one_state({{0.5, -1.0}, {0.5, 1.0}}), 0);
    EXPECT_EQ(mixed.period, 1);
    EXPECT_NEAR(mixed.stationary[SignChain::index(0, 1)], 0.5, 1e-14);
    EXPECT_NEAR(mixed.stationary[SignChain::index(0, -1)], 0.5, 1e-14);
    const auto flip = augmented_sign_chain(one_state({{1.0, -1.0}}), 0);
    EXPECT_EQ(flip.period, 2);
    EXPECT_NE(flip.cyclic_class[SignChain::index(0, 1)], flip.cyclic_class[SignChain::index(0, -1)]);
}

TEST(SignChain, SignHomologousStationaryMass) {
    const auto m = sign_homologous();
    const auto h = null_homology(m);
    ASSERT_TRUE(h.witness.sigma.has_value());
    const auto& sigma = *h.witness.sigma;
    for (std::size_t start = 0; start < 2; ++start) {
        const auto sc = augmented_sign_chain(m, start);
        for (std::size_t j = 0; j < 2; ++j)
            for (int d : {1, -1}) {
                const double expect = d == sigma[j] * sigma[start] ? m.pi()[j] : 0.0;
                EXPECT_NEAR(sc.stationary[SignChain::index(j, d)], expect, 1e-12);
            }
    }
}

TEST(SignChain, RequiresNullHomology) { EXPECT_THROW(augmented_sign_chain(one_state({{1.0, 0.5}}), 0), Error); }

TEST(Classify, ReportFields) {
    const auto r = classify(Model::validate(builtin::onestate_flip()), 0);
    EXPECT_EQ(r.embedded.tag, EmbeddedTag::T2p);
    ASSERT_TRUE(r.hat_tau.has_value());
    EXPECT_TRUE(r.hat_tau->two_periodic);
    ASSERT_TRUE(r.sign_chain.has_value());
    EXPECT_FALSE(classify(Model::validate(builtin::onestate_half()), 0).hat_tau.has_value());
}

TEST(ClassifyGenerator, FlowerIsContractingAlongReturnsButUnbounded) {
    const auto gen = flower_generator({});
    const auto r = classify_generator(gen, gen.start, 200000, 1);
    EXPECT_EQ(r.embedded, EmbeddedTag::T1p);
    EXPECT_EQ(r.mrw, MrwTag::T3);
}

TEST(ClassifyGenerator, FiniteAdapter) {
    const auto m = one_state({{1.0, 0.5}});
    const auto r = classify_generator(as_generator(m), 0, 1000, 1);
    EXPECT_EQ(r.embedded, EmbeddedTag::T1p);
    EXPECT_EQ(r.mrw, MrwTag::T1);
    EXPECT_EQ(classify_generator(as_generator(Model::validate(builtin::onestate_sign())), 0, 1000, 1).embedded, EmbeddedTag::T2p);
    EXPECT_EQ(classify_generator(as_generator(Model::validate(builtin::onestate_expanding())), 0, 1000, 1).embedded,
              EmbeddedTag::T3p);
}
