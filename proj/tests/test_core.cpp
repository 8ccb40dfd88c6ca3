#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "imocp/core.hpp"
#include "oracles.hpp"

using namespace imocp;

TEST(QuantileLoss, Examples) {
    EXPECT_NEAR(quantile_loss(0.5, 0.3, 0.1), 0.02, 1e-15);
    EXPECT_EQ(quantile_loss(0.3, 0.3, 0.1), 0.0);
    EXPECT_NEAR(quantile_loss(0.2, 0.5, 0.1), 0.27, 1e-15);
}

TEST(QuantileLoss, Convex) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-2.0, 3.0), lam(0.0, 1.0), a(0.01, 0.99);
    for (int i = 0; i < 5000; ++i) {
        const double r1 = u(gen), r2 = u(gen), s = u(gen), l = lam(gen), al = a(gen);
        const double lhs = quantile_loss(l * r1 + (1 - l) * r2, s, al);
        const double rhs = l * quantile_loss(r1, s, al) + (1 - l) * quantile_loss(r2, s, al);
        EXPECT_LE(lhs, rhs + 1e-12);
    }
}

TEST(QuantileLoss, SubgradientAwayFromKink) {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double r = u(gen), s = u(gen), al = 0.05 + 0.9 * u(gen);
        if (std::abs(r - s) < 1e-4) continue;
        const double fd = oracle::central_difference([&](double x) { return quantile_loss(x, s, al); }, r, 1e-6);
        const double expected = al - (miscoverage_indicator(r, s) ? 1.0 : 0.0);
        EXPECT_NEAR(fd, expected, 1e-8);
    }
}

TEST(MiscoverageIndicator, Examples) {
    EXPECT_TRUE(miscoverage_indicator(0.5, 0.6));
    EXPECT_FALSE(miscoverage_indicator(0.5, 0.5));
    EXPECT_FALSE(miscoverage_indicator(0.5, 0.1));
}

TEST(MiscoverageIndicator, NonIncreasingInThreshold) {
    for (double s : {0.0, 0.3, 0.7, 1.0}) {
        bool prev = true;
        for (double r = -0.5; r <= 1.5; r += 0.01) {
            const bool e = miscoverage_indicator(r, s);
            EXPECT_LE(e, prev);
            prev = e;
        }
    }
}

TEST(HindsightQuantile, OrderStatistic) {
    const std::vector<double> scores = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    EXPECT_EQ(hindsight_quantile(scores, 0.1), 9.0);
    // every grid point on [1,10] does at least as badly as 9
    const auto best = oracle::grid_minimize(
        [&](double u) { return oracle::pinball_sum(u, scores, 0.1); }, 1.0, 10.0, 1e-4);
    EXPECT_NEAR(best.arg, 9.0, 1e-4);
    EXPECT_LE(oracle::pinball_sum(9.0, scores, 0.1), best.value + 1e-12);
}

TEST(HindsightQuantile, Degenerate) {
    const std::vector<double> one = {0.37};
    EXPECT_EQ(hindsight_quantile(one, 0.5), 0.37);
    const std::vector<double> zeros = {0.0, 0.0, 0.0};
    EXPECT_EQ(hindsight_quantile(zeros, 0.1), 0.0);
    EXPECT_THROW(hindsight_quantile(std::span<const double>{}, 0.1), ValidationError);
}

TEST(HindsightQuantile, LeftEndpointOfMinimizingInterval) {
    // α = 0.5 with an even count: every u in [2, 3] minimizes
    const std::vector<double> scores = {1, 2, 3, 4};
    EXPECT_EQ(hindsight_quantile(scores, 0.5), 2.0);
}

TEST(HindsightQuantile, BeatsEveryGridPoint) {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> scores(5 + rep);
        for (double& s : scores) s = u(gen);
        const double alpha = 0.05 + 0.9 * u(gen);
        const double q = hindsight_quantile(scores, alpha);
        const double fq = oracle::pinball_sum(q, scores, alpha);
        const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
        const auto best = oracle::grid_minimize(
            [&](double x) { return oracle::pinball_sum(x, scores, alpha); }, *lo, *hi, 1e-4);
        EXPECT_LE(fq, best.value + 1e-12);
    }
}

TEST(WeightedHindsightQuantile, MatchesDuplication) {
    const std::vector<WeightedScore> w = {{0.2, 3.0}, {0.5, 1.0}, {0.9, 2.0}};
    const std::vector<double> dup = {0.2, 0.2, 0.2, 0.5, 0.9, 0.9};
    for (double a : {0.1, 0.3, 0.5, 0.7})
        EXPECT_EQ(weighted_hindsight_quantile(w, a), hindsight_quantile(dup, a));
}

TEST(ScoreValidation, RejectsOutOfRange) {
    EXPECT_NO_THROW(validate_score(0.0, 1.0));
    EXPECT_NO_THROW(validate_score(1.0, 1.0));
    EXPECT_THROW(validate_score(-1e-9, 1.0), ValidationError);
    EXPECT_THROW(validate_score(1.0 + 1e-9, 1.0), ValidationError);
    EXPECT_THROW(validate_score(std::nan(""), 1.0), ValidationError);
}

TEST(CalibrationConfig, Validation) {
    CalibrationConfig c;
    EXPECT_DOUBLE_EQ(c.initial_threshold(), 0.9);
    c.r_init = 0.3;
    EXPECT_DOUBLE_EQ(c.initial_threshold(), 0.3);
    c.alpha = 0.0;
    EXPECT_THROW(c.validate(), ValidationError);
    c.alpha = 0.1;
    c.score_bound = -1.0;
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(FeedbackEvent, Validation) {
    EXPECT_NO_THROW(FeedbackEvent::unobserved(0.3).validate(1.0));
    EXPECT_DOUBLE_EQ(FeedbackEvent::with_error(true, 0.25).importance_weight(), 4.0);
    EXPECT_EQ(FeedbackEvent::unobserved(0.25).importance_weight(), 0.0);
    EXPECT_THROW(FeedbackEvent::with_error(true, 0.0).validate(1.0), ValidationError);
    EXPECT_THROW(FeedbackEvent::with_score(1.5, 1.0).validate(1.0), ValidationError);
    FeedbackEvent bad{true, 1.0, std::nullopt, std::nullopt};
    EXPECT_THROW(bad.validate(1.0), ValidationError);
}

TEST(PredictionInterval, BoundaryIncludedAndRadiusFloored) {
    const auto iv = PredictionInterval::from_threshold(10.0, 0.5);
    EXPECT_TRUE(iv.contains(10.5));
    EXPECT_FALSE(iv.contains(10.50001));
    const auto empty = PredictionInterval::from_threshold(10.0, -0.2);
    EXPECT_EQ(empty.radius, 0.0);
    EXPECT_TRUE(empty.contains(10.0));
}
