#pragma once

// Seeded synthetic score streams: i.i.d. draws from one distribution, or a
// piecewise-stationary sequence of segments.

#include <cstdint>
#include <variant>
#include <vector>

#include "imocp/core.hpp"
#include "imocp/feedback.hpp"
#include "imocp/prior.hpp"

namespace imocp::harness {

struct UniformScores {
    double lo = 0.0;
    double hi = 1.0;
};

struct PointMass {
    double value = 0.0;
};

struct PriorScores {
    Prior prior;
};

using ScoreDistribution = std::variant<UniformScores, PointMass, PriorScores>;

struct Segment {
    std::size_t length = 0;
    ScoreDistribution distribution;
};

struct SyntheticSpec {
    std::vector<Segment> segments;

    static SyntheticSpec iid(std::size_t length, ScoreDistribution d) { return {{Segment{length, std::move(d)}}}; }

    std::size_t length() const {
        std::size_t n = 0;
        for (const auto& s : segments) n += s.length;
        return n;
    }

    void validate() const {
        if (segments.empty()) throw ValidationError("synthetic spec has no segments");
        for (const auto& s : segments) {
            if (s.length == 0) throw ValidationError("synthetic segment of length 0");
            if (auto* u = std::get_if<UniformScores>(&s.distribution)) {
                if (!(u->lo <= u->hi) || u->lo < 0.0)
                    throw ValidationError("uniform segment needs 0 <= lo <= hi");
            }
            if (auto* p = std::get_if<PointMass>(&s.distribution)) {
                if (!(p->value >= 0.0)) throw ValidationError("point mass must be non-negative");
            }
        }
    }
};

// Inverse-CDF sampling from u in [0,1).
inline double sample_score(const ScoreDistribution& d, double u) {
    return std::visit(
        [u](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, UniformScores>)
                return k.lo + (k.hi - k.lo) * u;
            else if constexpr (std::is_same_v<K, PointMass>)
                return k.value;
            else
                return k.prior.quantile(u);
        },
        d);
}

// Score for round t uses uniform01(seed, kScoreStream, t).
inline std::vector<double> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<double> scores;
    scores.reserve(spec.length());
    std::uint64_t t = 1;
    for (const auto& seg : spec.segments)
        for (std::size_t i = 0; i < seg.length; ++i, ++t)
            scores.push_back(sample_score(seg.distribution, rng::uniform01(seed, rng::kScoreStream, t)));
    return scores;
}

}  // namespace imocp::harness
