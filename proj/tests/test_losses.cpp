#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pdcf/autodiff.hpp"
#include "pdcf/losses.hpp"
#include "pdcf/ops.hpp"

using namespace pdcf;

TEST(LossConfig, ValidationRejectsBadValues) {
    LossConfig config;
    config.lambda_edge = -0.1;
    EXPECT_THROW(config.validate(), DataError);
    config = LossConfig{};
    config.epsilon = 0.0;
    EXPECT_THROW(config.validate(), DataError);
    config = LossConfig{};
    config.ssim_window = 10;
    EXPECT_THROW(config.validate(), DataError);
    config = LossConfig{};
    config.ssim_sigma = 0.0;
    EXPECT_THROW(config.validate(), DataError);
    config = LossConfig{};
    config.use_l2 = config.use_ssim = config.use_edge = false;
    EXPECT_THROW(config.validate(), DataError);
    EXPECT_NO_THROW(LossConfig{}.validate());
}

TEST(LossConfig, Defaults) {
    const LossConfig config;
    EXPECT_DOUBLE_EQ(config.lambda_edge, 0.05);
    EXPECT_DOUBLE_EQ(config.epsilon, 1e-3);
    EXPECT_EQ(config.ssim_window, 11);
    EXPECT_DOUBLE_EQ(config.ssim_sigma, 1.5);
    EXPECT_TRUE(config.use_l2 && config.use_ssim && config.use_edge);
}

TEST(GaussianWindow, NormalizedAndSymmetric) {
    const std::vector<double> w = losses::gaussian_window(11, 1.5);
    ASSERT_EQ(w.size(), 121u);
    double sum = 0.0;
    for (double v : w) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (int u = 0; u < 11; ++u) {
        for (int v = 0; v < 11; ++v) {
            EXPECT_DOUBLE_EQ(w[u * 11 + v], w[v * 11 + u]);
            EXPECT_DOUBLE_EQ(w[u * 11 + v], w[(10 - u) * 11 + (10 - v)]);
            EXPECT_LE(w[u * 11 + v], w[5 * 11 + 5]);
        }
    }
}

TEST(L2Loss, ZeroAtIdentityAndHandValue) {
    std::mt19937_64 rng(30);
    const Tensor x = oracles::random_tensor(Shape{1, 3, 6, 6}, rng, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(losses::l2_loss(nullptr, x, x).value(), 0.0);

    const Tensor a = Tensor::full(Shape{1, 1, 4, 4}, 0.75);
    const Tensor b = Tensor::full(Shape{1, 1, 4, 4}, 0.25);
    EXPECT_DOUBLE_EQ(losses::l2_loss(nullptr, a, b).value(), 0.25);

    EXPECT_THROW(losses::l2_loss(nullptr, a, Tensor(Shape{1, 1, 4, 5})), ShapeError);
}

TEST(L2Loss, GradientIsScaledDifference) {
    std::mt19937_64 rng(31);
    Tensor x = oracles::random_tensor(Shape{1, 2, 4, 4}, rng, 0.0, 1.0);
    const Tensor y = oracles::random_tensor(Shape{1, 2, 4, 4}, rng, 0.0, 1.0);
    x.set_requires_grad(true);
    Tape tape;
    tape.backward(losses::l2_loss(&tape, x, y));
    const double scale = 2.0 / static_cast<double>(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        EXPECT_NEAR(x.grad()[i], scale * (x.data()[i] - y.data()[i]), 1e-12);
    }
}

TEST(SsimLoss, ZeroAtIdentity) {
    std::mt19937_64 rng(32);
    const Tensor x = oracles::random_tensor(Shape{1, 3, 13, 13}, rng, 0.0, 1.0);
    EXPECT_LT(std::abs(losses::ssim_loss(nullptr, x, x).value()), 1e-12);
}

TEST(SsimLoss, SymmetricAndBounded) {
    std::mt19937_64 rng(33);
    const Tensor x = oracles::random_tensor(Shape{1, 1, 12, 14}, rng, 0.0, 1.0);
    const Tensor y = oracles::random_tensor(Shape{1, 1, 12, 14}, rng, 0.0, 1.0);
    const double xy = losses::ssim_loss(nullptr, x, y).value();
    const double yx = losses::ssim_loss(nullptr, y, x).value();
    EXPECT_NEAR(xy, yx, 1e-12);
    // SSIM lives in [-1, 1] (unrelated noise can push it slightly below
    // zero), so the loss 1 - SSIM lives in [0, 2].
    EXPECT_GT(xy, 0.0);
    EXPECT_LE(xy, 2.0);
}

TEST(SsimLoss, DegradesUnderNoise) {
    std::mt19937_64 rng(34);
    const Tensor x = oracles::random_tensor(Shape{1, 1, 16, 16}, rng, 0.2, 0.8);
    Tensor mild = x.clone();
    Tensor heavy = x.clone();
    std::normal_distribution<double> n1(0.0, 0.02), n2(0.0, 0.15);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        mild.data()[i] = std::clamp(mild.data()[i] + n1(rng), 0.0, 1.0);
        heavy.data()[i] = std::clamp(heavy.data()[i] + n2(rng), 0.0, 1.0);
    }
    const double lm = losses::ssim_loss(nullptr, x, mild).value();
    const double lh = losses::ssim_loss(nullptr, x, heavy).value();
    EXPECT_LT(lm, lh);
}

TEST(SsimLoss, RejectsImagesSmallerThanWindow) {
    const Tensor small(Shape{1, 1, 8, 8});
    EXPECT_THROW(losses::ssim_loss(nullptr, small, small), ShapeError);
    EXPECT_NO_THROW(losses::ssim_loss(nullptr, small, small, 5, 1.5));
}

TEST(EdgeLoss, EqualsEpsilonAtIdentity) {
    std::mt19937_64 rng(35);
    const Tensor x = oracles::random_tensor(Shape{1, 3, 7, 7}, rng, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(losses::edge_loss(nullptr, x, x).value(), 1e-3);
    EXPECT_DOUBLE_EQ(losses::edge_loss(nullptr, x, x, 0.02).value(), 0.02);
}

TEST(EdgeLoss, HandValueForImpulseDifference) {
    Tensor x = Tensor::zeros(Shape{1, 1, 3, 3});
    x.at(0, 0, 1, 1) = 1.0;
    const Tensor y = Tensor::zeros(Shape{1, 1, 3, 3});
    // Laplacian of a centered impulse: -4 at the center, 1 at each of the
    // four edge neighbors, 0 at corners.
    const double mean_sq = (16.0 + 4.0) / 9.0;
    EXPECT_NEAR(losses::edge_loss(nullptr, x, y).value(), std::sqrt(mean_sq + 1e-6), 1e-12);
}

TEST(EdgeLoss, LaplacianVanishesOnConstantInterior) {
    const Tensor c = Tensor::full(Shape{1, 2, 6, 6}, 0.3);
    const Tensor lap = ops::laplacian(nullptr, c);
    for (std::size_t ch = 0; ch < 2; ++ch) {
        for (std::size_t i = 1; i < 5; ++i) {
            for (std::size_t j = 1; j < 5; ++j) {
                EXPECT_DOUBLE_EQ(lap.at(0, ch, i, j), 0.0);
            }
        }
    }
    // Border rows see the zero padding.
    EXPECT_DOUBLE_EQ(lap.at(0, 0, 0, 1), -0.3);
}

TEST(EdgeLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(36);
    const Tensor y = oracles::random_tensor(Shape{1, 1, 6, 6}, rng, 0.0, 1.0);
    const double err = grad_check(
        [&](Tape* tape, const Tensor& x) { return losses::edge_loss(tape, x, y); },
        oracles::random_tensor(Shape{1, 1, 6, 6}, rng, 0.0, 1.0), 1e-5);
    EXPECT_LT(err, 1e-6);
}

TEST(TotalLoss, IdentityCollapsesToEdgeFloor) {
    std::mt19937_64 rng(37);
    const Tensor x = oracles::random_tensor(Shape{1, 3, 12, 12}, rng, 0.0, 1.0);
    LossBreakdown bd;
    const Tensor total = losses::total_loss(nullptr, x, x, LossConfig{}, &bd);
    EXPECT_NEAR(total.value(), 0.05 * 1e-3, 1e-12);
    EXPECT_DOUBLE_EQ(bd.l2, 0.0);
    EXPECT_LT(std::abs(bd.ssim), 1e-12);
    EXPECT_DOUBLE_EQ(bd.edge, 1e-3);
    EXPECT_DOUBLE_EQ(bd.total, total.value());
}

TEST(TotalLoss, NeverBelowWeightedEpsilon) {
    std::mt19937_64 rng(38);
    const LossConfig config;
    for (int rep = 0; rep < 5; ++rep) {
        const Tensor x = oracles::random_tensor(Shape{1, 3, 11, 11}, rng, 0.0, 1.0);
        const Tensor y = oracles::random_tensor(Shape{1, 3, 11, 11}, rng, 0.0, 1.0);
        EXPECT_GE(losses::total_loss(nullptr, x, y, config).value(),
                  config.lambda_edge * config.epsilon - 1e-12);
    }
}

TEST(TotalLoss, TermAblations) {
    std::mt19937_64 rng(39);
    const Tensor x = oracles::random_tensor(Shape{1, 3, 12, 12}, rng, 0.0, 1.0);
    const Tensor y = oracles::random_tensor(Shape{1, 3, 12, 12}, rng, 0.0, 1.0);

    LossConfig only_l2;
    only_l2.use_ssim = only_l2.use_edge = false;
    LossBreakdown bd;
    EXPECT_DOUBLE_EQ(losses::total_loss(nullptr, x, y, only_l2, &bd).value(),
                     losses::l2_loss(nullptr, x, y).value());
    EXPECT_DOUBLE_EQ(bd.ssim, 0.0);
    EXPECT_DOUBLE_EQ(bd.edge, 0.0);

    LossConfig only_ssim;
    only_ssim.use_l2 = only_ssim.use_edge = false;
    EXPECT_DOUBLE_EQ(losses::total_loss(nullptr, x, y, only_ssim).value(),
                     losses::ssim_loss(nullptr, x, y).value());

    LossConfig only_edge;
    only_edge.use_l2 = only_edge.use_ssim = false;
    EXPECT_DOUBLE_EQ(losses::total_loss(nullptr, x, y, only_edge, &bd).value(),
                     0.05 * losses::edge_loss(nullptr, x, y).value());
    // The breakdown reports the raw, unweighted term.
    EXPECT_DOUBLE_EQ(bd.edge, losses::edge_loss(nullptr, x, y).value());

    LossConfig none;
    none.use_l2 = none.use_ssim = none.use_edge = false;
    EXPECT_THROW(losses::total_loss(nullptr, x, y, none), DataError);
}

TEST(TotalLoss, SumOfTermsMatchesBreakdown) {
    std::mt19937_64 rng(40);
    const Tensor x = oracles::random_tensor(Shape{1, 3, 11, 13}, rng, 0.0, 1.0);
    const Tensor y = oracles::random_tensor(Shape{1, 3, 11, 13}, rng, 0.0, 1.0);
    LossBreakdown bd;
    const double total = losses::total_loss(nullptr, x, y, LossConfig{}, &bd).value();
    EXPECT_NEAR(total, bd.l2 + bd.ssim + 0.05 * bd.edge, 1e-12);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(41);
    const Tensor y = oracles::random_tensor(Shape{1, 1, 11, 11}, rng, 0.0, 1.0);
    const double err = grad_check(
        [&](Tape* tape, const Tensor& x) {
            return losses::total_loss(tape, x, y, LossConfig{});
        },
        oracles::random_tensor(Shape{1, 1, 11, 11}, rng, 0.0, 1.0), 1e-5);
    EXPECT_LT(err, 1e-4);
}
