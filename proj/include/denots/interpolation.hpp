#pragma once

#include "denots/tensor.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace denots {

inline bool is_missing(double x) { return std::isnan(x); }
constexpr double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }

// One irregular sequence. Missing feature entries are NaN. `target` holds a
// single value for sequence-level tasks and one row per timestamp (width =
// feature count) for forecasting, where query rows are those with every
// feature missing.
struct TimeSeries {
    std::vector<double> times; // strictly increasing, times[0] == 0 after normalization
    Tensor features;           // shape {n, u}
    std::vector<double> target;

    std::size_t length() const { return times.size(); }
    std::size_t channels() const { return features.rank() == 2 ? features.cols() : 0; }
    double timeframe() const { return times.empty() ? 0.0 : times.back() - times.front(); }

    void validate() const; // throws on non-increasing times or shape mismatch
};

// Natural cubic spline path through the observed entries of each channel.
// Channels are fitted independently on their own observed knots; fully
// missing channels evaluate to zero, single-observation channels to that
// constant. Between the domain boundary and a channel's first/last knot the
// value is held constant.
class CubicSplinePath {
public:
    static CubicSplinePath fit(const TimeSeries& series);

    std::size_t channels() const { return channels_.size(); }
    double t_begin() const { return t_begin_; }
    double t_end() const { return t_end_; }

    void eval(double t, std::span<double> out) const;
    void eval_derivative(double t, std::span<double> out) const;
    std::vector<double> eval(double t) const;
    std::vector<double> eval_derivative(double t) const;

    // Per-channel scalar access, used by diagnostics and tests.
    double eval_channel(std::size_t channel, double t) const;
    double derivative_channel(std::size_t channel, double t) const;
    // One-sided second derivatives at t; equal everywhere a channel is C2.
    double second_derivative_channel(std::size_t channel, double t, bool from_left) const;

private:
    struct Channel {
        std::vector<double> knots;
        // Segment k covers [knots[k], knots[k+1]] with local coefficients
        // value = a + b*s + c*s^2 + d*s^3, s = t - knots[k].
        std::vector<double> a, b, c, d;
        double const_value = 0.0; // used when knots.size() < 2
    };

    double check_domain(double t) const;

    std::vector<Channel> channels_;
    double t_begin_ = 0.0;
    double t_end_ = 0.0;
};

CubicSplinePath fit_natural_spline(const TimeSeries& series);

// Natural cubic spline through (x[i], y[i]) for plain 1-d data; the building
// block both for the path above and for test oracles working on raw knots.
struct SplineCoeffs {
    std::vector<double> knots;
    std::vector<double> a, b, c, d;
};
SplineCoeffs fit_natural_spline_1d(std::span<const double> x, std::span<const double> y);

} // namespace denots
