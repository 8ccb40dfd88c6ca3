#pragma once

// Online threshold calibrators: ACI, I-ACI, B-ACI, IB-ACI and IM-OCP. Each one
// is a single-writer state machine that consumes the feedback for round t and
// moves to the threshold for round t+1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "imocp/core.hpp"
#include "imocp/mirror.hpp"
#include "imocp/prior.hpp"
#include "imocp/root_finding.hpp"

namespace imocp {

class StepSizeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct StepSchedule {
    enum class Mode { fixed, decaying };

    Mode mode = Mode::decaying;
    double c = 0.1;
    double beta = 0.5;
    std::size_t horizon = 1;  // used by the fixed mode only

    static StepSchedule fixed(double c, double beta, std::size_t horizon) {
        return {Mode::fixed, c, beta, horizon};
    }
    static StepSchedule decaying(double c, double beta = 0.5) { return {Mode::decaying, c, beta, 1}; }

    // η_t for 1-based round t
    double eta(std::size_t t) const {
        if (mode == Mode::fixed) return c * std::pow(static_cast<double>(horizon), -beta);
        return c * std::pow(static_cast<double>(std::max<std::size_t>(t, 1)), -beta);
    }

    void validate() const {
        if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("step constant c must be positive");
        if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("step exponent beta must lie in (0,1)");
        if (mode == Mode::fixed && horizon < 1) throw ValidationError("fixed schedule needs a horizon");
    }
};

enum class Algorithm { aci, iaci, baci, ibaci, imocp };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::aci, Algorithm::iaci, Algorithm::baci,
                                               Algorithm::ibaci, Algorithm::imocp};

inline std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::aci: return "aci";
        case Algorithm::iaci: return "iaci";
        case Algorithm::baci: return "baci";
        case Algorithm::ibaci: return "ibaci";
        case Algorithm::imocp: return "imocp";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
    for (Algorithm a : kAllAlgorithms)
        if (to_string(a) == s) return a;
    throw ValidationError("unknown algorithm '" + std::string(s) +
                          "' (expected aci, iaci, baci, ibaci or imocp)");
}

enum class FeedbackMode { error, score };

inline FeedbackMode feedback_mode(Algorithm a) {
    return (a == Algorithm::baci || a == Algorithm::ibaci) ? FeedbackMode::score : FeedbackMode::error;
}

// ACI and B-ACI assume every round is observed.
inline bool requires_full_feedback(Algorithm a) { return a == Algorithm::aci || a == Algorithm::baci; }

// Scores kept sorted with prefix sums of their weights, so the FTRL objective's
// subgradient is evaluated in O(log n).
class WeightedScoreSet {
public:
    WeightedScoreSet() = default;
    explicit WeightedScoreSet(std::span<const WeightedScore> scores) {
        for (const auto& s : scores) insert(s.score, s.weight);
    }

    void insert(double score, double weight) {
        auto pos = std::upper_bound(entries_.begin(), entries_.end(), score,
                                    [](double v, const WeightedScore& e) { return v < e.score; });
        const auto idx = static_cast<std::size_t>(pos - entries_.begin());
        entries_.insert(pos, {score, weight});
        prefix_.resize(entries_.size() + 1);
        for (std::size_t i = idx; i < entries_.size(); ++i) prefix_[i + 1] = prefix_[i] + entries_[i].weight;
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    double total_weight() const { return prefix_.back(); }
    std::span<const WeightedScore> entries() const { return entries_; }

    // sum of weights of scores strictly greater than r
    double weight_above(double r) const {
        auto pos = std::upper_bound(entries_.begin(), entries_.end(), r,
                                    [](double v, const WeightedScore& e) { return v < e.score; });
        return total_weight() - prefix_[static_cast<std::size_t>(pos - entries_.begin())];
    }

private:
    std::vector<WeightedScore> entries_;
    std::vector<double> prefix_ = {0.0};
};

// argmin_r  h psi(r) + sum_i w_i ℓ_{1-α}(r, s_i), smallest minimizer.
//
// The right subgradient g(r) = h (F(r) - (1-α)) + α W - sum_{s_i > r} w_i is
// non-decreasing, negative for r < 0 and positive at B, so the minimizer is
// inf{r : g(r) >= 0} in [0,B]. Bisection narrows it to `width`; if a stored
// score falls in the last bracket it is the kink where g crosses zero.
inline double regularized_quantile(const Prior& prior, double alpha, double h,
                                   const WeightedScoreSet& scores, double width = 1e-10) {
    if (scores.empty() || scores.total_weight() <= 0.0) return prior.quantile(1.0 - alpha);
    if (h <= 0.0) return weighted_hindsight_quantile(scores.entries(), alpha);

    const double total = scores.total_weight();
    auto right_subgradient = [&](double r) {
        return h * (prior.cdf(r) - (1.0 - alpha)) + alpha * total - scores.weight_above(r);
    };
    if (right_subgradient(0.0) >= 0.0) return 0.0;

    const double bound = prior.support_bound();
    double lo = 0.0;
    double hi = bound;
    for (int i = 0; i < 400 && hi - lo > width; ++i) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        (right_subgradient(mid) >= 0.0 ? hi : lo) = mid;
    }

    auto entries = scores.entries();
    auto first = std::upper_bound(entries.begin(), entries.end(), lo,
                                  [](double v, const WeightedScore& e) { return v < e.score; });
    for (auto it = first; it != entries.end() && it->score < hi; ++it)
        if (right_subgradient(it->score) >= 0.0) return it->score;
    return hi;
}

struct CalibratorState {
    double threshold = 0.0;       // r_t
    std::size_t step_index = 1;   // t
    StepSchedule schedule;
    double varpi = 0.0;           // max_{i<t} η_i / p_i
    std::vector<WeightedScore> stored_scores;  // B-ACI / IB-ACI only, sorted by score
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return x >= lo && x <= hi; }
};

// Iterate containment interval [-α ϖ_t / μ, B + (1-α) ϖ_t / μ].
inline Interval lemma1_bounds(const CalibratorState& state, double alpha, double score_bound, double mu) {
    return {-alpha * state.varpi / mu, score_bound + (1.0 - alpha) * state.varpi / mu};
}

namespace detail {

class CalibratorBase {
public:
    double threshold() const { return state_.threshold; }
    const CalibratorState& state() const { return state_; }
    const CalibrationConfig& config() const { return config_; }

protected:
    CalibratorBase(const CalibrationConfig& config, const StepSchedule& schedule, double initial)
        : config_(config) {
        config_.validate();
        schedule.validate();
        state_.threshold = initial;
        state_.schedule = schedule;
    }

    double eta() const { return state_.schedule.eta(state_.step_index); }

    void advance(double next, double prob) {
        state_.varpi = std::max(state_.varpi, eta() / prob);
        state_.threshold = next;
        ++state_.step_index;
    }

    void check_event(const FeedbackEvent& event) const { event.validate(config_.score_bound); }

    // E_t, taken from the event or derived from a score payload.
    bool error_of(const FeedbackEvent& event) const {
        if (event.error) return *event.error;
        return miscoverage_indicator(state_.threshold, *event.score);
    }

    CalibrationConfig config_;
    CalibratorState state_;
};

}  // namespace detail

// r_{t+1} = r_t - η_t (α - E_t)
class Aci : public detail::CalibratorBase {
public:
    Aci(const CalibrationConfig& config, const StepSchedule& schedule)
        : CalibratorBase(config, schedule, config.initial_threshold()) {}

    double step(bool error) { return step(FeedbackEvent::with_error(error, 1.0)); }

    double step(const FeedbackEvent& event) {
        check_event(event);
        if (!event.observed || event.prob != 1.0)
            throw ValidationError("ACI requires feedback at every round (p = 1)");
        const double e = error_of(event) ? 1.0 : 0.0;
        advance(state_.threshold - eta() * (config_.alpha - e), event.prob);
        return state_.threshold;
    }
};

// r_{t+1} = r_t - η_t (α - E_t) obs_t / p_t
class IntermittentAci : public detail::CalibratorBase {
public:
    IntermittentAci(const CalibrationConfig& config, const StepSchedule& schedule)
        : CalibratorBase(config, schedule, config.initial_threshold()) {}

    double step(const FeedbackEvent& event) {
        check_event(event);
        double next = state_.threshold;
        if (event.observed) {
            const double e = error_of(event) ? 1.0 : 0.0;
            next = state_.threshold - eta() * (config_.alpha - e) * event.importance_weight();
        }
        advance(next, event.prob);
        return state_.threshold;
    }
};

namespace detail {

// Shared by B-ACI and IB-ACI: FTRL on the (weighted) pinball losses with the
// prior term h_t psi, h_t = η_t (t-1) / (1 - η_t).
class FtrlCalibrator : public CalibratorBase {
public:
    double h() const { return h_at(state_.step_index); }

protected:
    FtrlCalibrator(const CalibrationConfig& config, const StepSchedule& schedule, Prior prior)
        : CalibratorBase(config, schedule, prior.quantile(1.0 - config.alpha)), prior_(std::move(prior)) {
        if (prior_.support_bound() != config_.score_bound)
            throw ValidationError("prior support bound differs from score_bound");
        // η_t is non-increasing, so checking η_1 covers every round.
        if (!(schedule.eta(1) < 1.0))
            throw StepSizeError("B-ACI needs η_t < 1, got η_1 = " + std::to_string(schedule.eta(1)));
    }

    double h_at(std::size_t t) const {
        const double eta_t = state_.schedule.eta(t);
        if (!(eta_t < 1.0)) throw StepSizeError("B-ACI needs η_t < 1");
        return eta_t * static_cast<double>(t - 1) / (1.0 - eta_t);
    }

    void consume(std::optional<WeightedScore> observed, double prob) {
        if (observed) {
            scores_.insert(observed->score, observed->weight);
            auto e = scores_.entries();
            state_.stored_scores.assign(e.begin(), e.end());
        }
        const double next = regularized_quantile(prior_, config_.alpha, h_at(state_.step_index + 1), scores_);
        advance(next, prob);
    }

    Prior prior_;
    WeightedScoreSet scores_;
};

}  // namespace detail

// r_{t+1} = argmin_r h_{t+1} psi(r) + sum_{i<=t} ℓ_{1-α}(r, r*_i)
class BayesianAci : public detail::FtrlCalibrator {
public:
    BayesianAci(const CalibrationConfig& config, const StepSchedule& schedule, Prior prior)
        : FtrlCalibrator(config, schedule, std::move(prior)) {}

    double step(double score) { return step(FeedbackEvent::with_score(score, 1.0)); }

    double step(const FeedbackEvent& event) {
        check_event(event);
        if (!event.observed || !event.score || event.prob != 1.0)
            throw ValidationError("B-ACI requires score feedback at every round (p = 1)");
        consume(WeightedScore{*event.score, 1.0}, event.prob);
        return state_.threshold;
    }
};

// As B-ACI with losses weighted by obs_i / p_i. The argmin is recomputed on
// unobserved rounds too, since h_t moves with t.
class IntermittentBayesianAci : public detail::FtrlCalibrator {
public:
    IntermittentBayesianAci(const CalibrationConfig& config, const StepSchedule& schedule, Prior prior)
        : FtrlCalibrator(config, schedule, std::move(prior)) {}

    double step(const FeedbackEvent& event) {
        check_event(event);
        std::optional<WeightedScore> observed;
        if (event.observed) {
            if (!event.score) throw ValidationError("IB-ACI requires score feedback");
            observed = WeightedScore{*event.score, event.importance_weight()};
        }
        consume(observed, event.prob);
        return state_.threshold;
    }
};

// r_{t+1} = M_R^{-1}(M_R(r_t) - η_t (α - E_t) obs_t / p_t)
class ImOcp : public detail::CalibratorBase {
public:
    ImOcp(const CalibrationConfig& config, const StepSchedule& schedule, MirrorMap map)
        : CalibratorBase(config, schedule, config.initial_threshold()), map_(std::move(map)) {
        const auto& reg = map_.regularizer();
        if (reg.alpha() != config_.alpha) throw ValidationError("regularizer alpha differs from config alpha");
        if (reg.score_bound() != config_.score_bound)
            throw ValidationError("prior support bound differs from score_bound");
    }

    ImOcp(const CalibrationConfig& config, const StepSchedule& schedule, const Regularizer& reg)
        : ImOcp(config, schedule, MirrorMap(reg)) {}

    const MirrorMap& mirror() const { return map_; }

    double step(const FeedbackEvent& event) {
        check_event(event);
        double next = state_.threshold;
        if (event.observed) {
            const double e = error_of(event) ? 1.0 : 0.0;
            const double dual =
                map_.forward(state_.threshold) - eta() * (config_.alpha - e) * event.importance_weight();
            next = map_.inverse(dual);
        }
        advance(next, event.prob);
        return state_.threshold;
    }

    Interval iterate_bounds() const {
        return lemma1_bounds(state_, config_.alpha, config_.score_bound, map_.regularizer().mu());
    }

private:
    MirrorMap map_;
};

using Calibrator = std::variant<Aci, IntermittentAci, BayesianAci, IntermittentBayesianAci, ImOcp>;

inline Calibrator make_calibrator(Algorithm algorithm, const CalibrationConfig& config,
                                  const StepSchedule& schedule, const Regularizer& reg) {
    switch (algorithm) {
        case Algorithm::aci: return Aci(config, schedule);
        case Algorithm::iaci: return IntermittentAci(config, schedule);
        case Algorithm::baci: return BayesianAci(config, schedule, reg.prior());
        case Algorithm::ibaci: return IntermittentBayesianAci(config, schedule, reg.prior());
        case Algorithm::imocp: return ImOcp(config, schedule, reg);
    }
    throw ValidationError("unknown algorithm");
}

inline double step(Calibrator& c, const FeedbackEvent& event) {
    return std::visit([&](auto& impl) { return impl.step(event); }, c);
}

inline double threshold(const Calibrator& c) {
    return std::visit([](const auto& impl) { return impl.threshold(); }, c);
}

inline const CalibratorState& state(const Calibrator& c) {
    return std::visit([](const auto& impl) -> const CalibratorState& { return impl.state(); }, c);
}

}  // namespace imocp
