#pragma once

// Scalar scores, thresholds, the quantile (pinball) loss and the hindsight
// quantile comparator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace imocp {

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct CalibrationConfig {
    double alpha = 0.1;
    double score_bound = 1.0;
    std::optional<double> r_init;  // unset means 1 - alpha
    std::size_t horizon = 1;

    double initial_threshold() const { return r_init.value_or(1.0 - alpha); }

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ValidationError("alpha must lie in (0,1), got " + std::to_string(alpha));
        if (!(score_bound > 0.0) || !std::isfinite(score_bound))
            throw ValidationError("score_bound must be positive and finite");
        if (horizon < 1) throw ValidationError("horizon must be at least 1");
        if (r_init && !std::isfinite(*r_init)) throw ValidationError("r_init must be finite");
    }
};

inline void validate_score(double score, double score_bound) {
    if (!(score >= 0.0 && score <= score_bound))
        throw ValidationError("score " + std::to_string(score) + " outside [0, " +
                              std::to_string(score_bound) + "]");
}

// Feedback for one round. `error` carries E_t (miscoverage error feedback),
// `score` carries r*_t (score feedback). Both are absent when unobserved.
struct FeedbackEvent {
    bool observed = false;
    double prob = 1.0;
    std::optional<bool> error;
    std::optional<double> score;

    static FeedbackEvent unobserved(double p) { return {false, p, std::nullopt, std::nullopt}; }
    static FeedbackEvent with_error(bool e, double p) { return {true, p, e, std::nullopt}; }
    static FeedbackEvent with_score(double s, double p) { return {true, p, std::nullopt, s}; }

    // obs_t / p_t
    double importance_weight() const { return observed ? 1.0 / prob : 0.0; }

    void validate(double score_bound) const {
        if (!(prob > 0.0 && prob <= 1.0))
            throw ValidationError("feedback probability must lie in (0,1]");
        if (!observed) {
            if (error || score) throw ValidationError("unobserved event carries a payload");
            return;
        }
        if (!error && !score) throw ValidationError("observed event carries no payload");
        if (score) validate_score(*score, score_bound);
    }
};

struct PredictionInterval {
    double center = 0.0;
    double radius = 0.0;

    // Thresholds may go negative; the set is then empty-ish, so the radius is floored at 0.
    static PredictionInterval from_threshold(double center, double threshold) {
        return {center, std::max(threshold, 0.0)};
    }
    bool contains(double y) const { return std::abs(y - center) <= radius; }
    double lower() const { return center - radius; }
    double upper() const { return center + radius; }
};

struct StreamRecord {
    std::size_t t = 0;
    double threshold = 0.0;
    double true_score = 0.0;
    bool error = false;
    bool observed = false;
    double prob = 1.0;
    double loss = 0.0;
    int group = 0;
};

struct WeightedScore {
    double score = 0.0;
    double weight = 1.0;
};

// ℓ_{1-α}(r, r*) = (α - 1{r < r*})(r - r*)
inline double quantile_loss(double r, double r_star, double alpha) {
    return (alpha - (r < r_star ? 1.0 : 0.0)) * (r - r_star);
}

// The set {y : s(x,y) <= r} includes the boundary.
inline bool miscoverage_indicator(double threshold, double true_score) {
    return true_score > threshold;
}

// Smallest minimizer of u -> sum_i w_i ℓ_{1-α}(u, s_i). This is the smallest
// score u whose right subgradient alpha*W - sum_{s_i > u} w_i is non-negative.
inline double weighted_hindsight_quantile(std::span<const WeightedScore> scores, double alpha) {
    if (scores.empty()) throw ValidationError("hindsight quantile of an empty sequence");
    std::vector<WeightedScore> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const WeightedScore& a, const WeightedScore& b) { return a.score < b.score; });
    double total = 0.0;
    for (const auto& s : sorted) total += s.weight;
    const double budget = alpha * total * (1.0 + 1e-12);

    double at_or_below = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double u = sorted[i].score;
        while (i < sorted.size() && sorted[i].score == u) at_or_below += sorted[i++].weight;
        if (total - at_or_below <= budget) return u;
    }
    return sorted.back().score;
}

// q_α(r*_{1:T}); the ⌈(1-α)T⌉-th order statistic.
inline double hindsight_quantile(std::span<const double> scores, double alpha) {
    std::vector<WeightedScore> w;
    w.reserve(scores.size());
    for (double s : scores) w.push_back({s, 1.0});
    return weighted_hindsight_quantile(w, alpha);
}

}  // namespace imocp
