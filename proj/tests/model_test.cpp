#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "gatedflow/model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gatedflow;
using test::binary_state;
using test::enumerate_marginals;
using test::random_binary;
using test::random_model;

TEST(Sigmoid, StableAtExtremes) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_FALSE(std::isnan(sigmoid(-std::numeric_limits<double>::max())));
    EXPECT_NEAR(sigmoid(2.0) + sigmoid(-2.0), 1.0, 1e-15);
}

TEST(BaselineRbm, EnergyByHand) {
    BaselineRBM m{MatrixXd(2, 1), VectorXd(2), VectorXd(1)};
    m.w << 0.5, -1.0;
    m.b << 0.25, 0.75;
    m.c << -0.5;
    VectorXd v(2), h(1);
    v << 1, 1;
    h << 1;
    // -(0.5 - 1.0) - (0.25 + 0.75) - (-0.5)
    EXPECT_DOUBLE_EQ(baseline_energy(m, v, h), 0.5 - 1.0 + 0.5);
}

TEST(BaselineRbm, ConditionalsMatchEnumeration) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    const int nv = 5, nh = 4;
    BaselineRBM m{MatrixXd(nv, nh), VectorXd(nv), VectorXd(nh)};
    for (Eigen::Index i = 0; i < m.w.size(); ++i) m.w.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < nv; ++i) m.b[i] = n(rng);
    for (Eigen::Index i = 0; i < nh; ++i) m.c[i] = n(rng);
    for (int trial = 0; trial < 10; ++trial) {
        const VectorXd v = random_binary(nv, rng);
        const VectorXd h = random_binary(nh, rng);
        const VectorXd ph = enumerate_marginals(nh, [&](const VectorXd& s) { return baseline_energy(m, v, s); });
        const VectorXd pv = enumerate_marginals(nv, [&](const VectorXd& s) { return baseline_energy(m, s, h); });
        EXPECT_LE((baseline_cond_h(m, v) - ph).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((baseline_cond_v(m, h) - pv).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(FullTensor, ElementsAreFactorSums) {
    std::mt19937_64 rng(3);
    const FactoredGRBM m = random_model(3, 4, 2, 5, rng);
    const Tensor3 w = full_tensor(m);
    ASSERT_EQ(w.data.size(), 3u * 4u * 2u);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 4; ++j)
            for (Eigen::Index k = 0; k < 2; ++k) {
                double s = 0.0;
                for (Eigen::Index f = 0; f < 5; ++f) s += m.wxf(i, f) * m.wyf(j, f) * m.whf(k, f);
                EXPECT_NEAR(w(i, j, k), s, 1e-14);
            }
}

TEST(CondEnergy, MatchesTensorContraction) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const FactoredGRBM m = random_model(6, 6, 4, 5, rng);
        const Tensor3 w = full_tensor(m);
        const VectorXd x = random_binary(6, rng), y = random_binary(6, rng), h = random_binary(4, rng);
        EXPECT_NEAR(cond_energy(m, x, y, h), tensor_energy(w, m, x, y, h), 1e-9);
    }
}

TEST(CondEnergy, ZeroModelAndBiasOnly) {
    FactoredGRBM m = FactoredGRBM::zeros(3, 3, 2, 2);
    const VectorXd ones = VectorXd::Ones(3);
    EXPECT_EQ(cond_energy(m, ones, ones, VectorXd::Ones(2)), 0.0);
    m.ybias << 1.0, 2.0, 3.0;
    m.hbias << -1.0, 0.5;
    EXPECT_DOUBLE_EQ(cond_energy(m, ones, ones, VectorXd::Ones(2)), -(6.0 - 0.5));
}

TEST(CondEnergy, SwappingRolesOfXAndY) {
    std::mt19937_64 rng(8);
    FactoredGRBM m = random_model(5, 5, 3, 4, rng);
    m.ybias.setZero();
    FactoredGRBM swapped = m;
    std::swap(swapped.wxf, swapped.wyf);
    for (int trial = 0; trial < 20; ++trial) {
        const VectorXd x = random_binary(5, rng), y = random_binary(5, rng), h = random_binary(3, rng);
        EXPECT_NEAR(cond_energy(m, x, y, h), cond_energy(swapped, y, x, h), 1e-12);
    }
}

TEST(CondEnergy, RejectsWrongShapes) {
    const FactoredGRBM m = FactoredGRBM::zeros(3, 3, 2, 2);
    EXPECT_THROW(cond_energy(m, VectorXd::Zero(4), VectorXd::Zero(3), VectorXd::Zero(2)), DimensionError);
    FactoredGRBM bad = m;
    bad.whf.resize(2, 3);
    EXPECT_THROW(bad.validate(), DimensionError);
}

TEST(Conditionals, HiddenMatchesEnumeration) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const FactoredGRBM m = random_model(4, 4, 8, 3, rng, 0.8);
        const VectorXd x = random_binary(4, rng), y = random_binary(4, rng);
        const VectorXd oracle = enumerate_marginals(8, [&](const VectorXd& h) { return cond_energy(m, x, y, h); });
        const HiddenState hs = prob_h_cond(m, x, y);
        EXPECT_FALSE(hs.has_sample());
        EXPECT_LE((hs.probs - oracle).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Conditionals, OutputMatchesEnumeration) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        const FactoredGRBM m = random_model(3, 9, 3, 4, rng, 0.8);
        const VectorXd x = random_binary(3, rng), h = random_binary(3, rng);
        const VectorXd oracle = enumerate_marginals(9, [&](const VectorXd& y) { return cond_energy(m, x, y, h); });
        EXPECT_LE((prob_y_cond(m, x, h) - oracle).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Conditionals, FractionalHiddenIsLinearInput) {
    // h enters the output conditional linearly, so h = 0.5 halves every factor gate.
    std::mt19937_64 rng(23);
    FactoredGRBM m = random_model(4, 4, 2, 3, rng);
    const VectorXd x = random_binary(4, rng);
    FactoredGRBM halved = m;
    halved.whf *= 0.5;
    EXPECT_LE((prob_y_cond(m, x, VectorXd::Constant(2, 0.5)) - prob_y_cond(halved, x, VectorXd::Ones(2)))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-15);
}

TEST(Spatial, EnergyEqualsCondEnergyWithTiedWeights) {
    std::mt19937_64 rng(30);
    for (int trial = 0; trial < 50; ++trial) {
        const FactoredGRBM m = random_model(5, 5, 3, 4, rng);
        const VectorXd x = random_binary(5, rng), h = random_binary(3, rng);
        EXPECT_EQ(spatial_energy(m, x, h), cond_energy(tie_weights(m), x, x, h));
    }
}

TEST(Spatial, HiddenMatchesEnumeration) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const FactoredGRBM m = random_model(6, 6, 6, 4, rng, 0.7);
        const VectorXd x = random_binary(6, rng);
        const VectorXd oracle = enumerate_marginals(6, [&](const VectorXd& h) { return spatial_energy(m, x, h); });
        EXPECT_LE((spatial_prob_h(m, x).probs - oracle).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Spatial, ZeroImageLeavesOnlyBias) {
    std::mt19937_64 rng(32);
    const FactoredGRBM m = random_model(4, 4, 3, 2, rng);
    const VectorXd p = spatial_prob_h(m, VectorXd::Zero(4)).probs;
    for (Eigen::Index k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(p[k], sigmoid(m.hbias[k]));
}

TEST(NegEnergyGrad, MatchesFiniteDifferences) {
    std::mt19937_64 rng(40);
    for (int trial = 0; trial < 10; ++trial) {
        const FactoredGRBM m = random_model(6, 6, 4, 5, rng);
        const VectorXd x = random_binary(6, rng), y = random_binary(6, rng), h = random_binary(4, rng);
        const FactoredGRBM a = neg_energy_grad(m, x, y, h);
        const FactoredGRBM n = test::numeric_neg_energy_grad(m, x, y, h, 1e-5);
        EXPECT_LE(test::max_rel_error(a.wxf, n.wxf, 1e-3), 1e-6);
        EXPECT_LE(test::max_rel_error(a.wyf, n.wyf, 1e-3), 1e-6);
        EXPECT_LE(test::max_rel_error(a.whf, n.whf, 1e-3), 1e-6);
        EXPECT_LE(test::max_rel_error(a.ybias, n.ybias, 1e-3), 1e-6);
        EXPECT_LE(test::max_rel_error(a.hbias, n.hbias, 1e-3), 1e-6);
    }
}

TEST(ModelOps, AddScaledAndScale) {
    std::mt19937_64 rng(41);
    const FactoredGRBM a = random_model(2, 3, 2, 2, rng);
    FactoredGRBM b = a;
    b.add_scaled(a, 1.0);
    b.scale(0.5);
    EXPECT_TRUE(b == a);
    EXPECT_TRUE(a.all_finite());
    b.hbias[0] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(b.all_finite());
}

TEST(ModelFile, RoundTripIsBitExact) {
    std::mt19937_64 rng(50);
    FactoredGRBM m = random_model(7, 5, 3, 4, rng);
    m.wxf(0, 0) = -0.0;
    m.wyf(1, 2) = std::numeric_limits<double>::denorm_min();
    m.hbias[2] = 1e300;
    test::TempDir dir;
    save_model(m, dir / "m.grbm");
    const FactoredGRBM back = load_model(dir / "m.grbm");
    EXPECT_TRUE(back == m);
    EXPECT_TRUE(std::signbit(back.wxf(0, 0)));
    EXPECT_EQ(encode_model(back), encode_model(m));
}

TEST(ModelFile, LayoutIsHeaderThenLittleEndianBlocks) {
    FactoredGRBM m = FactoredGRBM::zeros(1, 1, 1, 1);
    m.wxf(0, 0) = 1.0;
    m.hbias[0] = -2.0;
    const auto bytes = encode_model(m);
    const std::string header = "GRBM1\n1 1 1 1\n";
    ASSERT_EQ(bytes.size(), header.size() + 5 * 8);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())), header);
    auto value_at = [&](std::size_t slot) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= static_cast<std::uint64_t>(bytes[header.size() + slot * 8 + static_cast<std::size_t>(b)]) << (8 * b);
        return std::bit_cast<double>(bits);
    };
    EXPECT_EQ(value_at(0), 1.0);
    EXPECT_EQ(value_at(4), -2.0);
}

TEST(ModelFile, Errors) {
    const auto good = encode_model(FactoredGRBM::zeros(2, 2, 2, 2));
    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_model(bad_magic), ParseError);
    auto truncated = good;
    truncated.pop_back();
    try {
        decode_model(truncated);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.field(), "payload");
    }
    EXPECT_THROW(load_model("/nonexistent/model.grbm"), IoError);
}
