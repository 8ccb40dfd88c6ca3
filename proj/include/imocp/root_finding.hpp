#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace imocp {

class IterationLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Smallest x in (lo, hi] with pred(x) true, to within `width`, for a predicate
// that is false on (lo, x*) and true on [x*, hi]. Requires pred(hi) true.
// Returns the final upper end of the bracket.
template <typename Pred>
double bisect_threshold(Pred&& pred, double lo, double hi, double width, int max_iterations = 400) {
    for (int i = 0; i < max_iterations; ++i) {
        if (hi - lo <= width) return hi;
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) return hi;  // bracket is down to adjacent doubles
        if (pred(mid))
            hi = mid;
        else
            lo = mid;
    }
    throw IterationLimitError("bisection did not reach width " + std::to_string(width));
}

// Root of an increasing function on [lo, hi] with f(lo) <= 0 <= f(hi), using
// Newton steps where they stay inside the bracket and bisection otherwise.
// Stops when |f(x)| <= tolerance.
template <typename F, typename DF>
double safeguarded_newton(F&& f, DF&& df, double lo, double hi, double x0, double tolerance,
                          int max_iterations) {
    double x = x0;
    if (!(x > lo && x < hi)) x = lo + 0.5 * (hi - lo);
    for (int i = 0; i < max_iterations; ++i) {
        const double fx = f(x);
        if (std::abs(fx) <= tolerance) return x;
        if (fx < 0)
            lo = x;
        else
            hi = x;
        const double slope = df(x);
        double next = slope > 0 ? x - fx / slope : lo - 1.0;
        if (!(next > lo && next < hi)) next = lo + 0.5 * (hi - lo);
        if (next == x) return x;
        x = next;
    }
    throw IterationLimitError("root finding did not reach tolerance " + std::to_string(tolerance) +
                              " within " + std::to_string(max_iterations) + " iterations");
}

}  // namespace imocp
