#include <gtest/gtest.h>

#include <cmath>

#include "perpetua/discrete_law.hpp"

using namespace perpetua;

TEST(DiscreteLaw, MergesNearbyAtomsAndDropsZeroMass) {
    const auto law = DiscreteLaw::from_atoms({{1.0, 0.25}, {1.0 + 1e-14, 0.25}, {3.0, 0.5}, {7.0, 0.0}});
    ASSERT_EQ(law.size(), 2u);
    EXPECT_DOUBLE_EQ(law.atoms()[0].m, 0.5);
    EXPECT_DOUBLE_EQ(law.atoms()[1].v, 3.0);
}

TEST(DiscreteLaw, MeanCdfAndMassNear) {
    const auto law = DiscreteLaw::from_atoms({{-1.0, 0.25}, {2.0, 0.75}});
    EXPECT_DOUBLE_EQ(law.mean(), 1.25);
    EXPECT_DOUBLE_EQ(law.cdf(-1.0), 0.25);
    EXPECT_DOUBLE_EQ(law.cdf(1.9), 0.25);
    EXPECT_DOUBLE_EQ(law.cdf(2.0), 1.0);
    EXPECT_DOUBLE_EQ(law.mass_near(2.0 + 1e-7, 1e-6), 0.75);
}

TEST(DiscreteLaw, AffineReflectAndSymmetrize) {
    const auto law = DiscreteLaw::from_atoms({{1.0, 0.5}, {3.0, 0.5}});
    const auto t = law.affine(-2.0, 1.0);
    EXPECT_EQ(t, DiscreteLaw::from_atoms({{-1.0, 0.5}, {-5.0, 0.5}}));
    EXPECT_EQ(DiscreteLaw::point(2.0).symmetrized(), DiscreteLaw::from_atoms({{-2.0, 0.5}, {2.0, 0.5}}));
    EXPECT_EQ(law.reflected().reflected(), law);
}

TEST(DiscreteLaw, MixtureWeightsParts) {
    const auto m = DiscreteLaw::mixture({{0.25, DiscreteLaw::point(0.0)}, {0.75, DiscreteLaw::from_atoms({{0.0, 0.5}, {1.0, 0.5}})}});
    EXPECT_EQ(m, DiscreteLaw::from_atoms({{0.0, 0.625}, {1.0, 0.375}}));
}

TEST(DiscreteLaw, Distances) {
    const auto f = DiscreteLaw::from_atoms({{0.0, 0.5}, {1.0, 0.5}});
    const auto g = DiscreteLaw::point(0.0);
    EXPECT_DOUBLE_EQ(ks_distance(f, g), 0.5);
    EXPECT_DOUBLE_EQ(tv_distance(f, g), 0.5);
    EXPECT_DOUBLE_EQ(w1_distance(f, g), 0.5);
    EXPECT_DOUBLE_EQ(w1_distance(DiscreteLaw::point(2.0), DiscreteLaw::point(-1.0)), 3.0);
    EXPECT_DOUBLE_EQ(ks_distance(f, f), 0.0);
}

TEST(DiscreteLaw, KsToleranceAbsorbsRoundoff) {
    const auto f = DiscreteLaw::point(1.0);
    const auto g = DiscreteLaw::point(1.0 + 1e-9);
    EXPECT_DOUBLE_EQ(ks_distance(f, g), 1.0);
    EXPECT_DOUBLE_EQ(ks_distance(f, g, 1e-6), 0.0);
}

TEST(DiscreteLaw, GridProjectionKeepsMassAndMean) {
    std::vector<Atom> atoms;
    for (int k = 0; k < 1000; ++k) atoms.push_back({std::sin(k * 1.3) * 5.0, 1.0 / 1000.0});
    const auto law = DiscreteLaw::from_atoms(atoms);
    const auto g = law.grid_projected(0.25);
    EXPECT_LE(g.size(), 41u + 1u);
    EXPECT_NEAR(g.mean(), law.mean(), 1e-12);
    EXPECT_NEAR(g.atom_mass(), 1.0, 1e-12);
    EXPECT_LE(w1_distance(g, law), 0.25);
}

TEST(DiscreteLaw, FromSamplesCountsFrequencies) {
    const auto law = DiscreteLaw::from_samples({1.0, 2.0, 2.0, 3.0});
    EXPECT_EQ(law, DiscreteLaw::from_atoms({{1.0, 0.25}, {2.0, 0.5}, {3.0, 0.25}}));
}
