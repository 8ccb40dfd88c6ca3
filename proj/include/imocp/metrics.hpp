#pragma once

// Empirical coverage / regret metrics and the closed-form IM-OCP guarantees.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "imocp/core.hpp"
#include "imocp/prior.hpp"

namespace imocp {

class MetricsAccumulator {
public:
    explicit MetricsAccumulator(bool keep_scores = true) : keep_scores_(keep_scores) {}

    void add(const StreamRecord& rec) {
        ++rounds_;
        error_count_ += rec.error ? 1 : 0;
        cumulative_loss_ += rec.loss;
        if (rec.observed) weighted_cumulative_loss_ += rec.loss / rec.prob;
        if (keep_scores_) score_log_.push_back(rec.true_score);
    }

    void merge(const MetricsAccumulator& other) {
        rounds_ += other.rounds_;
        error_count_ += other.error_count_;
        cumulative_loss_ += other.cumulative_loss_;
        weighted_cumulative_loss_ += other.weighted_cumulative_loss_;
        keep_scores_ = keep_scores_ && other.keep_scores_;
        if (keep_scores_)
            score_log_.insert(score_log_.end(), other.score_log_.begin(), other.score_log_.end());
        else
            score_log_.clear();
    }

    std::size_t rounds() const { return rounds_; }
    std::size_t error_count() const { return error_count_; }
    double cumulative_loss() const { return cumulative_loss_; }
    double weighted_cumulative_loss() const { return weighted_cumulative_loss_; }
    const std::vector<double>& score_log() const { return score_log_; }

    double miscoverage() const {
        return rounds_ ? static_cast<double>(error_count_) / static_cast<double>(rounds_) : 0.0;
    }

private:
    bool keep_scores_;
    std::size_t rounds_ = 0;
    std::size_t error_count_ = 0;
    double cumulative_loss_ = 0.0;
    double weighted_cumulative_loss_ = 0.0;
    std::vector<double> score_log_;
};

// |T^{-1} sum E_t - α|
inline double miscoverage_rate(std::span<const StreamRecord> records, double alpha) {
    if (records.empty()) throw ValidationError("miscoverage of an empty run");
    double errors = 0.0;
    for (const auto& r : records) errors += r.error ? 1.0 : 0.0;
    return std::abs(errors / static_cast<double>(records.size()) - alpha);
}

inline std::vector<double> true_scores(std::span<const StreamRecord> records) {
    std::vector<double> s;
    s.reserve(records.size());
    for (const auto& r : records) s.push_back(r.true_score);
    return s;
}

// Cumulative loss minus the loss of q_α over all true scores. The weighted form
// replaces the first sum by sum ℓ(r_t, r*_t) obs_t / p_t; the comparator is
// never weighted.
inline double regret(std::span<const StreamRecord> records, double alpha, bool weighted) {
    if (records.empty()) throw ValidationError("regret of an empty run");
    const auto scores = true_scores(records);
    const double q = hindsight_quantile(scores, alpha);
    double online = 0.0;
    double comparator = 0.0;
    for (const auto& r : records) {
        const double loss = quantile_loss(r.threshold, r.true_score, alpha);
        if (!weighted)
            online += loss;
        else if (r.observed)
            online += loss / r.prob;
        comparator += quantile_loss(q, r.true_score, alpha);
    }
    return online - comparator;
}

struct TheoryConstants {
    double L = 1.0;
    double mu = 1.0;
    double B = 1.0;
    double p_min = 1.0;
    double eta_1 = 1.0;
    double eta_T = 1.0;
    double D_T = 0.0;
};

// Expected-miscoverage bound (1/(T η_T)) (L B + L η_1 / (μ p_min)).
inline double theorem1_bound(const TheoryConstants& k, std::size_t T) {
    return (k.L * k.B + k.L * k.eta_1 / (k.mu * k.p_min)) / (static_cast<double>(T) * k.eta_T);
}

// Expected-regret bound D_T / η_T + (1/(2 μ p_min)) sum η_i, with η_T the last entry.
inline double theorem2_bound(const TheoryConstants& k, std::span<const double> etas) {
    if (etas.empty()) throw ValidationError("theorem2_bound needs at least one step size");
    const double sum = std::accumulate(etas.begin(), etas.end(), 0.0);
    return k.D_T / etas.back() + sum / (2.0 * k.mu * k.p_min);
}

struct RateExponents {
    double gamma = 0.0;
    double regret_exponent = 0.0;
};

inline RateExponents corollary1_rates(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("beta must lie in (0,1)");
    return {1.0 - beta, std::max(beta, 1.0 - beta)};
}

// D_T = max_t B_R(q, r_t)
inline double max_bregman(const Regularizer& reg, double q, std::span<const StreamRecord> records) {
    double d = 0.0;
    for (const auto& r : records) d = std::max(d, reg.bregman(q, r.threshold));
    return d;
}

struct PowerLawFit {
    double scale = 0.0;     // A
    double exponent = 0.0;  // y ≈ A x^exponent
    std::size_t points = 0;
};

// Least squares on (log x, log y) over the points with x, y > 0.
inline PowerLawFit fit_power_law(std::span<const double> xs, std::span<const double> ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < std::min(xs.size(), ys.size()); ++i) {
        if (!(xs[i] > 0.0 && ys[i] > 0.0)) continue;
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return {std::nan(""), std::nan(""), n};
    const double dn = static_cast<double>(n);
    const double denom = dn * sxx - sx * sx;
    if (denom == 0.0) return {std::nan(""), std::nan(""), n};
    const double slope = (dn * sxy - sx * sy) / denom;
    return {std::exp((sy - slope * sx) / dn), slope, n};
}

// Diagnostic (A, γ) with |t^{-1} sum_{i<=t} E_i - α| ≈ A t^{-γ}, fitted on a
// geometric grid of checkpoints t >= 10.
inline PowerLawFit fit_miscoverage_decay(std::span<const StreamRecord> records, double alpha) {
    std::vector<double> ts, devs;
    double errors = 0.0;
    double next = 10.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        errors += records[i].error ? 1.0 : 0.0;
        const double t = static_cast<double>(i + 1);
        if (t >= next || i + 1 == records.size()) {
            ts.push_back(t);
            devs.push_back(std::abs(errors / t - alpha));
            while (next <= t) next *= 1.25;
        }
    }
    PowerLawFit fit = fit_power_law(ts, devs);
    fit.exponent = -fit.exponent;  // report γ as a decay rate
    return fit;
}

struct SampleSummary {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

inline SampleSummary summarize(std::span<const double> xs) {
    SampleSummary s;
    s.n = xs.size();
    if (xs.empty()) return s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std_error = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
    }
    return s;
}

}  // namespace imocp
