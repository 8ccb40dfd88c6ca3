#pragma once

#include "imocp/prior.hpp"
#include "imocp/root_finding.hpp"

namespace imocp {

// M_R = ∇R and its inverse. ∇R is affine with slope sigma on both sides of
// [0,B], so only the middle branch needs a root search, and [0,B] brackets it.
class MirrorMap {
public:
    explicit MirrorMap(Regularizer reg, double tolerance = 1e-12, int max_iterations = 200)
        : reg_(std::move(reg)), tolerance_(tolerance), max_iterations_(max_iterations) {
        if (!(tolerance > 0.0)) throw ValidationError("mirror tolerance must be positive");
        if (max_iterations < 1) throw ValidationError("mirror max_iterations must be positive");
    }

    const Regularizer& regularizer() const { return reg_; }
    double tolerance() const { return tolerance_; }
    int max_iterations() const { return max_iterations_; }

    double forward(double r) const { return reg_.grad(r); }

    double inverse(double d) const {
        const double alpha = reg_.alpha();
        const double sigma = reg_.sigma();
        const double bound = reg_.score_bound();
        const double at_zero = forward(0.0);
        const double at_bound = forward(bound);
        if (d <= at_zero) return (d + (1.0 - alpha)) / sigma;
        if (d >= at_bound) return (d - alpha) / sigma;

        // Secant guess across the bracket, then safeguarded Newton.
        const double guess = bound * (d - at_zero) / (at_bound - at_zero);
        return safeguarded_newton([&](double r) { return forward(r) - d; },
                                  [&](double r) { return reg_.hessian(r); }, 0.0, bound, guess,
                                  tolerance_, max_iterations_);
    }

private:
    Regularizer reg_;
    double tolerance_;
    int max_iterations_;
};

}  // namespace imocp
