#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "imocp/feedback.hpp"

using namespace imocp;

TEST(Rng, SplitMixReferenceValues) {
    // splitmix64 stepped from state 0, as in the reference implementation
    EXPECT_EQ(rng::splitmix64(0), 0xE220A8397B1DCDAFull);
    EXPECT_EQ(rng::splitmix64(0x9E3779B97F4A7C15ull), 0x6E789E6AA1B965F4ull);
}

TEST(Rng, UniformInUnitInterval) {
    for (std::uint64_t n = 0; n < 10000; ++n) {
        const double u = rng::uniform01(42, 1, n);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
    EXPECT_NE(rng::uniform01(42, 1, 7), rng::uniform01(43, 1, 7));
    EXPECT_NE(rng::uniform01(42, 1, 7), rng::uniform01(42, 2, 7));
}

TEST(Rng, EngineMatchesCounterDraws) {
    rng::CounterEngine eng(5, 9);
    for (std::uint64_t n = 0; n < 100; ++n) EXPECT_EQ(eng(), rng::bits(5, 9, n));
}

TEST(FeedbackPolicy, FullProbabilityAlwaysObserved) {
    const auto p = FeedbackPolicy::constant(1.0, 77);
    for (std::size_t t = 1; t <= 10000; ++t) ASSERT_TRUE(p.draw_observation(t));
}

TEST(FeedbackPolicy, EmpiricalFrequency) {
    const auto p = FeedbackPolicy::constant(0.5, 2024);
    std::size_t hits = 0;
    const std::size_t n = 100000;
    for (std::size_t t = 1; t <= n; ++t) hits += p.draw_observation(t) ? 1 : 0;
    const double freq = static_cast<double>(hits) / static_cast<double>(n);
    EXPECT_GE(freq, 0.49);
    EXPECT_LE(freq, 0.51);
}

TEST(FeedbackPolicy, ImportanceWeightsUnbiased) {
    for (double prob : {0.1, 0.3, 0.5, 0.9}) {
        const auto p = FeedbackPolicy::constant(prob, 31);
        const std::size_t n = 100000;
        double sum = 0.0;
        for (std::size_t t = 1; t <= n; ++t) sum += make_event(p.draw_observation(t), prob, 0, 0, FeedbackMode::error)
                                                        .importance_weight();
        const double mean = sum / static_cast<double>(n);
        const double se = std::sqrt((1.0 - prob) / prob / static_cast<double>(n));
        EXPECT_NEAR(mean, 1.0, 3.0 * se) << "p=" << prob;
    }
}

TEST(FeedbackPolicy, Deterministic) {
    const auto a = FeedbackPolicy::per_group({0.5, 0.3, 0.1}, 9);
    const auto b = FeedbackPolicy::per_group({0.5, 0.3, 0.1}, 9);
    for (std::size_t t = 1; t <= 1000; ++t) {
        const int g = static_cast<int>(t % 3);
        ASSERT_EQ(a.draw_observation(t, g), b.draw_observation(t, g));
        ASSERT_EQ(a.draw_observation(t, g), a.draw_observation(t, g));
    }
    const auto c = a.with_seed(10);
    std::size_t differ = 0;
    for (std::size_t t = 1; t <= 1000; ++t) differ += a.draw_observation(t, 0) != c.draw_observation(t, 0);
    EXPECT_GT(differ, 0u);
}

TEST(FeedbackPolicy, CounterModeIgnoresCallOrder) {
    const auto p = FeedbackPolicy::constant(0.4, 5);
    std::vector<bool> forward, backward(500);
    for (std::size_t t = 1; t <= 500; ++t) forward.push_back(p.draw_observation(t));
    for (std::size_t t = 500; t >= 1; --t) backward[t - 1] = p.draw_observation(t);
    EXPECT_EQ(forward, backward);
}

TEST(FeedbackPolicy, GroupsAndRounds) {
    const auto g = FeedbackPolicy::per_group({0.5, 0.3, 0.1}, 1);
    EXPECT_DOUBLE_EQ(g.prob(17, 1), 0.3);
    EXPECT_DOUBLE_EQ(g.p_min(), 0.1);
    EXPECT_THROW(g.prob(1, 3), ValidationError);
    const auto r = FeedbackPolicy::per_round({0.2, 0.7}, 1);
    EXPECT_DOUBLE_EQ(r.prob(2), 0.7);
    EXPECT_THROW(r.prob(3), ValidationError);
    EXPECT_THROW(FeedbackPolicy::constant(0.0, 1), ValidationError);
    EXPECT_THROW(FeedbackPolicy::per_group({0.5, 1.2}, 1), ValidationError);
}

TEST(MakeEvent, Payloads) {
    const auto none = make_event(false, 0.5, 0.5, 0.7, FeedbackMode::error);
    EXPECT_FALSE(none.observed);
    EXPECT_FALSE(none.error);
    EXPECT_FALSE(none.score);
    const auto err = make_event(true, 0.5, 0.5, 0.7, FeedbackMode::error);
    ASSERT_TRUE(err.error);
    EXPECT_TRUE(*err.error);
    EXPECT_FALSE(err.score);
    const auto sc = make_event(true, 0.5, 0.5, 0.7, FeedbackMode::score);
    ASSERT_TRUE(sc.score);
    EXPECT_EQ(*sc.score, 0.7);
    EXPECT_FALSE(sc.error);
    EXPECT_THROW(make_event(true, 0.0, 0.5, 0.7, FeedbackMode::error), ValidationError);
}
