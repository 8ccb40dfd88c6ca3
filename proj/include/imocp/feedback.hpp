#pragma once

// Intermittent feedback: Bernoulli(p_t) observation draws from a counter-based
// generator, and construction of FeedbackEvents from ground truth.
//
// Generator (documented so other implementations can reproduce streams):
//   splitmix64(x): x += 0x9E3779B97F4A7C15;
//                  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9;
//                  x = (x ^ (x >> 27)) * 0x94D049BB133111EB;
//                  return x ^ (x >> 31);
//   key(seed, stream) = splitmix64(seed ^ (stream * 0xD1B54A32D192ED03))
//   bits(seed, stream, n) = splitmix64(key(seed, stream) + n * 0x9E3779B97F4A7C15)
//   uniform01 = (bits >> 11) * 2^-53, in [0,1)
// Observation at round t (1-based): obs_t = uniform01(seed, kObservationStream, t) < p_t.

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

#include "imocp/calibrators.hpp"
#include "imocp/core.hpp"

namespace imocp {

namespace rng {

inline constexpr std::uint64_t kObservationStream = 1;
inline constexpr std::uint64_t kScoreStream = 2;
inline constexpr std::uint64_t kSplitStream = 3;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const std::uint64_t key = splitmix64(seed ^ (stream * 0xD1B54A32D192ED03ULL));
    return splitmix64(key + counter * 0x9E3779B97F4A7C15ULL);
}

constexpr double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return static_cast<double>(bits(seed, stream, counter) >> 11) * 0x1.0p-53;
}

// Sequential engine over the same counter construction, usable with <random>
// distributions and std::shuffle.
class CounterEngine {
public:
    using result_type = std::uint64_t;
    CounterEngine(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return bits(seed_, stream_, counter_++); }
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace rng

// Probabilities come either per round or per group; a constant policy is a
// single group.
class FeedbackPolicy {
public:
    static FeedbackPolicy constant(double p, std::uint64_t seed) { return per_group({p}, seed); }

    static FeedbackPolicy per_group(std::vector<double> probs, std::uint64_t seed) {
        FeedbackPolicy policy(std::move(probs), seed);
        policy.by_round_ = false;
        return policy;
    }

    static FeedbackPolicy per_round(std::vector<double> probs, std::uint64_t seed) {
        FeedbackPolicy policy(std::move(probs), seed);
        policy.by_round_ = true;
        return policy;
    }

    std::uint64_t seed() const { return seed_; }
    bool by_round() const { return by_round_; }
    const std::vector<double>& probs() const { return probs_; }
    FeedbackPolicy with_seed(std::uint64_t seed) const {
        FeedbackPolicy p = *this;
        p.seed_ = seed;
        return p;
    }

    // p_t for round t (1-based) belonging to `group`
    double prob(std::size_t t, int group = 0) const {
        if (by_round_) {
            if (t < 1 || t > probs_.size()) throw ValidationError("round outside the per-round policy");
            return probs_[t - 1];
        }
        if (group < 0 || static_cast<std::size_t>(group) >= probs_.size())
            throw ValidationError("no feedback probability for group " + std::to_string(group));
        return probs_[static_cast<std::size_t>(group)];
    }

    double p_min() const { return *std::min_element(probs_.begin(), probs_.end()); }

    bool draw_observation(std::size_t t, int group = 0) const {
        return rng::uniform01(seed_, rng::kObservationStream, t) < prob(t, group);
    }

private:
    FeedbackPolicy(std::vector<double> probs, std::uint64_t seed) : probs_(std::move(probs)), seed_(seed) {
        if (probs_.empty()) throw ValidationError("feedback policy needs at least one probability");
        for (double p : probs_)
            if (!(p > 0.0 && p <= 1.0)) throw ValidationError("feedback probabilities must lie in (0,1]");
    }

    std::vector<double> probs_;
    std::uint64_t seed_ = 0;
    bool by_round_ = false;
};

inline FeedbackEvent make_event(bool observed, double p, double threshold, double true_score, FeedbackMode mode) {
    if (!(p > 0.0)) throw ValidationError("feedback probability must be positive");
    if (!observed) return FeedbackEvent::unobserved(p);
    if (mode == FeedbackMode::error)
        return FeedbackEvent::with_error(miscoverage_indicator(threshold, true_score), p);
    return FeedbackEvent::with_score(true_score, p);
}

}  // namespace imocp
