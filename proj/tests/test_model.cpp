#include <gtest/gtest.h>

#include "perpetua/builtin_models.hpp"
#include "perpetua/model.hpp"
#include "test_support.hpp"

using namespace perpetua;

namespace {

bool has_issue(const ModelSpec& s, ErrorCode code) {
    try {
        Model::validate(s);
    } catch (const ModelError& e) {
        for (const auto& is : e.issues())
            if (is.code == code) return true;
    }
    return false;
}

ModelSpec flower3() {
    ModelSpec s(3);
    s.edge(0, 0, 0.5, 1.0, 1.0).edge(0, 1, 0.25, 0.5, 1.0).edge(0, 2, 0.25, 0.5, 1.0);
    s.edge(1, 0, 1.0, 0.5, 1.0).edge(2, 0, 1.0, 0.5, 1.0);
    return s;
}

} // namespace

TEST(Model, OneStateIsValid) {
    const auto m = Model::validate(builtin::onestate_half());
    EXPECT_EQ(m.size(), 1u);
    EXPECT_DOUBLE_EQ(m.pi()[0], 1.0);
}

TEST(Model, PeriodicChainRejected) {
    ModelSpec s(2);
    s.edge(0, 1, 1.0, 0.5, 1.0).edge(1, 0, 1.0, 0.5, 1.0);
    EXPECT_TRUE(has_issue(s, ErrorCode::NotAperiodic));
}

TEST(Model, ValidationReportsEveryKind) {
    ModelSpec reducible(2);
    reducible.edge(0, 0, 1.0, 0.5, 1.0).edge(1, 0, 1.0, 0.5, 1.0);
    EXPECT_TRUE(has_issue(reducible, ErrorCode::NotIrreducible));

    ModelSpec rows(1);
    rows.edge(0, 0, 0.9, 0.5, 1.0);
    EXPECT_TRUE(has_issue(rows, ErrorCode::RowSumError));

    ModelSpec missing(1);
    missing.set_p(0, 0, 1.0);
    EXPECT_TRUE(has_issue(missing, ErrorCode::MissingEdgeLaw));

    ModelSpec extra(2);
    extra.edge(0, 0, 0.5, 0.5, 1.0).edge(0, 1, 0.5, 0.5, 1.0).edge(1, 0, 1.0, 0.5, 1.0);
    extra.add_atom(1, 1, 1.0, 0.5, 1.0);
    EXPECT_TRUE(has_issue(extra, ErrorCode::ExtraEdgeLaw));

    ModelSpec weights(1);
    weights.set_p(0, 0, 1.0);
    weights.add_atom(0, 0, 0.6, 0.5, 1.0);
    EXPECT_TRUE(has_issue(weights, ErrorCode::BadWeights));

    ModelSpec dup(2);
    dup.edge(0, 0, 0.5, 0.5, 1.0).edge(0, 1, 0.5, 0.5, 1.0).edge(1, 0, 1.0, 0.5, 1.0);
    dup.labels = {"x", "x"};
    EXPECT_TRUE(has_issue(dup, ErrorCode::DuplicateLabel));
}

TEST(Model, ExampleChainIsValid) {
    const auto m = Model::validate(builtin::grincevicius4());
    EXPECT_EQ(m.size(), 4u);
    EXPECT_EQ(m.edge_list().size(), 5u);
}

TEST(Stationary, SymmetricRows) {
    ModelSpec s(2);
    s.edge(0, 0, 0.5, 0.5, 1.0).edge(0, 1, 0.5, 0.5, 1.0).edge(1, 0, 0.5, 0.5, 1.0).edge(1, 1, 0.5, 0.5, 1.0);
    const auto m = Model::validate(s);
    EXPECT_NEAR(m.pi()[0], 0.5, 1e-14);
    EXPECT_NEAR(m.pi()[1], 0.5, 1e-14);
}

TEST(Stationary, FlowerAndExampleChain) {
    const auto f = Model::validate(flower3());
    EXPECT_NEAR(f.pi()[0], 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(f.pi()[1], 1.0 / 6.0, 1e-14);
    EXPECT_NEAR(f.pi()[2], 1.0 / 6.0, 1e-14);
    const auto g = Model::validate(builtin::grincevicius4());
    const std::vector<double> expect{0.4, 0.2, 0.2, 0.2};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g.pi()[i], expect[i], 1e-14);
}

TEST(Stationary, AgreesWithPowerIterationOnRandomModels) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto m = perpetua::testing::random_model(seed);
        const auto p = perpetua::testing::power_stationary(m);
        double balance = 0.0;
        for (std::size_t j = 0; j < m.size(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m.size(); ++i) s += m.pi()[i] * m.p(i, j);
            balance = std::max(balance, std::abs(s - m.pi()[j]));
            EXPECT_NEAR(m.pi()[j], p[j], 1e-10) << "seed " << seed;
        }
        EXPECT_LT(balance, 1e-13);
    }
}

TEST(Dual, FlowerEntry) {
    const auto d = dual(Model::validate(flower3()));
    EXPECT_NEAR(d.p(0, 1), 0.25, 1e-14);
    EXPECT_NEAR(d.p(1, 0), 1.0, 1e-14);
}

TEST(Dual, ReversibleAndOneStateUnchanged) {
    ModelSpec s(2);
    s.edge(0, 0, 0.3, 0.5, 1.0).edge(0, 1, 0.7, -0.5, 1.0).edge(1, 0, 0.7, 2.0, 1.0).edge(1, 1, 0.3, 0.5, 0.0);
    const auto m = Model::validate(s);
    const auto d = dual(m);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(d.p(i, j), m.p(i, j), 1e-14);
    const auto one = Model::validate(builtin::onestate_sign());
    const auto d1 = dual(one);
    EXPECT_EQ(d1.edge(0, 0).size(), one.edge(0, 0).size());
    EXPECT_DOUBLE_EQ(d1.p(0, 0), 1.0);
}

TEST(Dual, InvolutionTransposeAndStationary) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto m = perpetua::testing::random_model(seed);
        const auto d = dual(m);
        const auto dd = dual(d);
        for (std::size_t i = 0; i < m.size(); ++i) {
            EXPECT_NEAR(d.pi()[i], m.pi()[i], 1e-12);
            for (std::size_t j = 0; j < m.size(); ++j) {
                EXPECT_NEAR(dd.p(i, j), m.p(i, j), 1e-12);
                EXPECT_EQ(d.p(i, j) > 0.0, m.p(j, i) > 0.0);
                const auto& e = m.edge(i, j);
                const auto& de = d.edge(j, i);
                ASSERT_EQ(e.size(), de.size());
                double w = 0.0;
                for (std::size_t k = 0; k < e.size(); ++k) {
                    EXPECT_EQ(e[k].a, de[k].a);
                    EXPECT_EQ(e[k].b, de[k].b);
                    w += e[k].w;
                }
                if (!e.empty()) EXPECT_NEAR(w, 1.0, 1e-12);
            }
        }
    }
}

TEST(StandingAssumption, Flags) {
    ModelSpec s(1);
    s.set_p(0, 0, 1.0);
    s.add_atom(0, 0, 0.1, 0.0, 1.0);
    s.add_atom(0, 0, 0.9, 0.5, 1.0);
    const auto r = check_standing_assumption(Model::validate(s));
    EXPECT_FALSE(r.a_never_zero);
    EXPECT_NEAR(r.prob_a_zero, 0.1, 1e-15);
    EXPECT_FALSE(check_standing_assumption(Model::validate(builtin::onestate_reflect())).b_not_identically_zero);
    EXPECT_TRUE(check_standing_assumption(Model::validate(builtin::grincevicius4())).holds());
}
