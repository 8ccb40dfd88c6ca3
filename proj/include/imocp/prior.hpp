#pragma once

// Priors on [0,B] and the regularizer R(r) = psi(r) + (sigma/2) r^2 whose
// gradient is the IM-OCP mirror map.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>

#include "imocp/core.hpp"
#include "imocp/root_finding.hpp"

namespace imocp {

namespace detail {

inline double std_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}
inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

struct UniformPrior {};

struct TriangularPrior {
    double mode = 0.0;
};

// Parent N(mean, variance) truncated to [0,B]; `variance` is the parent's.
struct TruncatedGaussianPrior {
    double mean = 0.0;
    double variance = 1.0;
};

class Prior {
public:
    using Kind = std::variant<UniformPrior, TriangularPrior, TruncatedGaussianPrior>;

    static Prior uniform(double bound) { return Prior(UniformPrior{}, bound); }
    static Prior triangular(double mode, double bound) { return Prior(TriangularPrior{mode}, bound); }
    static Prior truncated_gaussian(double mean, double variance, double bound) {
        return Prior(TruncatedGaussianPrior{mean, variance}, bound);
    }

    Prior(Kind kind, double bound) : kind_(kind), bound_(bound) {
        if (!(bound > 0.0) || !std::isfinite(bound))
            throw ValidationError("prior support bound must be positive");
        if (auto* tri = std::get_if<TriangularPrior>(&kind_)) {
            if (!(tri->mode >= 0.0 && tri->mode <= bound))
                throw ValidationError("triangular mode must lie in [0, B]");
        }
        if (auto* tg = std::get_if<TruncatedGaussianPrior>(&kind_)) {
            if (!(tg->variance > 0.0) || !std::isfinite(tg->mean))
                throw ValidationError("truncated Gaussian needs finite mean and positive variance");
            sd_ = std::sqrt(tg->variance);
            z_lo_ = (0.0 - tg->mean) / sd_;
            cdf_lo_ = detail::std_normal_cdf(z_lo_);
            mass_ = detail::std_normal_cdf((bound - tg->mean) / sd_) - cdf_lo_;
            if (!(mass_ > 0.0)) throw ValidationError("truncated Gaussian has no mass on [0, B]");
        }
    }

    const Kind& kind() const { return kind_; }
    double support_bound() const { return bound_; }

    std::string name() const {
        return std::visit(
            [](const auto& k) -> std::string {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, UniformPrior>)
                    return "uniform";
                else if constexpr (std::is_same_v<K, TriangularPrior>)
                    return "triangular";
                else
                    return "truncated_gaussian";
            },
            kind_);
    }

    double pdf(double r) const {
        if (r < 0.0 || r > bound_) return 0.0;
        const double b = bound_;
        return std::visit(
            [&](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, UniformPrior>) {
                    return 1.0 / b;
                } else if constexpr (std::is_same_v<K, TriangularPrior>) {
                    const double m = k.mode;
                    if (m > 0.0 && r <= m) return 2.0 * r / (b * m);
                    return 2.0 * (b - r) / (b * (b - m));
                } else {
                    return detail::std_normal_pdf((r - k.mean) / sd_) / (sd_ * mass_);
                }
            },
            kind_);
    }

    double cdf(double r) const {
        if (r <= 0.0) return 0.0;
        if (r >= bound_) return 1.0;
        const double b = bound_;
        return std::visit(
            [&](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, UniformPrior>) {
                    return r / b;
                } else if constexpr (std::is_same_v<K, TriangularPrior>) {
                    const double m = k.mode;
                    if (m > 0.0 && r <= m) return r * r / (b * m);
                    return 1.0 - (b - r) * (b - r) / (b * (b - m));
                } else {
                    return (detail::std_normal_cdf((r - k.mean) / sd_) - cdf_lo_) / mass_;
                }
            },
            kind_);
    }

    // ∫_0^r x pdf(x) dx, clamped to [0, mean()].
    double partial_moment(double r) const {
        r = std::clamp(r, 0.0, bound_);
        const double b = bound_;
        return std::visit(
            [&](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, UniformPrior>) {
                    return r * r / (2.0 * b);
                } else if constexpr (std::is_same_v<K, TriangularPrior>) {
                    const double m = k.mode;
                    if (m > 0.0 && r <= m) return 2.0 * r * r * r / (3.0 * b * m);
                    const double at_mode = 2.0 * m * m / (3.0 * b);
                    return at_mode +
                           (b * (r * r - m * m) - (2.0 / 3.0) * (r * r * r - m * m * m)) / (b * (b - m));
                } else {
                    const double z = (r - k.mean) / sd_;
                    return (k.mean * (detail::std_normal_cdf(z) - cdf_lo_) -
                            sd_ * (detail::std_normal_pdf(z) - detail::std_normal_pdf(z_lo_))) /
                           mass_;
                }
            },
            kind_);
    }

    double mean() const { return partial_moment(bound_); }

    double pdf_sup() const {
        return std::visit(
            [&](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, UniformPrior>)
                    return 1.0 / bound_;
                else if constexpr (std::is_same_v<K, TriangularPrior>)
                    return 2.0 / bound_;
                else
                    return pdf(std::clamp(k.mean, 0.0, bound_));
            },
            kind_);
    }

    // Smallest r with cdf(r) >= q.
    double quantile(double q) const {
        if (q <= 0.0) return 0.0;
        if (q >= 1.0) return bound_;
        const double b = bound_;
        if (std::holds_alternative<UniformPrior>(kind_)) return q * b;
        if (auto* tri = std::get_if<TriangularPrior>(&kind_)) {
            const double m = tri->mode;
            if (q <= m / b) return std::sqrt(q * b * m);
            return b - std::sqrt((1.0 - q) * b * (b - m));
        }
        return bisect_threshold([&](double r) { return cdf(r) >= q; }, 0.0, b, 1e-15 * b);
    }

private:
    Kind kind_;
    double bound_;
    // truncated Gaussian normalization
    double sd_ = 1.0;
    double z_lo_ = 0.0;
    double cdf_lo_ = 0.0;
    double mass_ = 1.0;
};

// R(r) = psi(r) + (sigma/2) r^2 with psi(r) = E_{r*~P}[ℓ_{1-α}(r, r*)].
class Regularizer {
public:
    Regularizer(Prior prior, double sigma, double alpha)
        : prior_(std::move(prior)), sigma_(sigma), alpha_(alpha) {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be positive");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
        prior_mean_ = prior_.mean();
    }

    const Prior& prior() const { return prior_; }
    double sigma() const { return sigma_; }
    double alpha() const { return alpha_; }
    double score_bound() const { return prior_.support_bound(); }

    // Curvature outside [0,B] is exactly sigma, so sigma is the global
    // strong-convexity constant whatever the prior.
    double mu() const { return sigma_; }
    double smoothness() const { return prior_.pdf_sup() + sigma_; }

    // alpha (r - E r*) - E[(r - r*) 1{r* > r}]
    double psi(double r) const {
        const double upper_mass = 1.0 - prior_.cdf(r);
        const double upper_moment = prior_mean_ - prior_.partial_moment(r);
        return alpha_ * (r - prior_mean_) - (r * upper_mass - upper_moment);
    }

    double psi_derivative(double r) const { return prior_.cdf(r) - (1.0 - alpha_); }

    double value(double r) const { return psi(r) + 0.5 * sigma_ * r * r; }

    double grad(double r) const {
        if (r < 0.0) return -(1.0 - alpha_) + sigma_ * r;
        if (r > score_bound()) return alpha_ + sigma_ * r;
        return prior_.cdf(r) - (1.0 - alpha_) + sigma_ * r;
    }

    double hessian(double r) const {
        if (r < 0.0 || r > score_bound()) return sigma_;
        return prior_.pdf(r) + sigma_;
    }

    double bregman(double u, double v) const {
        return value(u) - value(v) - grad(v) * (u - v);
    }

    // argmin psi: the prior's (1-α)-quantile
    double psi_minimizer() const { return prior_.quantile(1.0 - alpha_); }

private:
    Prior prior_;
    double sigma_;
    double alpha_;
    double prior_mean_ = 0.0;
};

}  // namespace imocp
