#include "denots/interpolation.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace denots {

void TimeSeries::validate() const {
    if (times.size() < 2) throw std::invalid_argument("TimeSeries: need at least 2 timestamps");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw std::invalid_argument("TimeSeries: times not strictly increasing at index " +
                                        std::to_string(i));
        }
    }
    if (features.rank() != 2 || features.rows() != times.size()) {
        throw std::invalid_argument("TimeSeries: features must be n x u with n == times.size()");
    }
}

SplineCoeffs fit_natural_spline_1d(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) {
        throw std::invalid_argument("fit_natural_spline_1d: need matching x/y with >= 2 knots");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(x[i] > x[i - 1])) {
            throw std::invalid_argument("fit_natural_spline_1d: knots not strictly increasing");
        }
    }

    std::vector<double> h(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x[i + 1] - x[i];

    // Second derivatives M with natural boundary M[0] = M[n-1] = 0, solved
    // with the Thomas algorithm on the interior tridiagonal system.
    std::vector<double> m(n, 0.0);
    if (n > 2) {
        const std::size_t k = n - 2; // interior unknowns
        std::vector<double> diag(k), upper(k), rhs(k);
        for (std::size_t i = 0; i < k; ++i) {
            diag[i] = (h[i] + h[i + 1]) / 3.0;
            upper[i] = h[i + 1] / 6.0;
            rhs[i] = (y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i];
        }
        for (std::size_t i = 1; i < k; ++i) {
            const double lower = h[i] / 6.0;
            const double w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for (std::size_t i = k - 1; i >= 1; --i) {
            m[i] = (rhs[i - 1] - upper[i - 1] * m[i + 1]) / diag[i - 1];
        }
    }

    SplineCoeffs out;
    out.knots.assign(x.begin(), x.end());
    out.a.resize(n - 1);
    out.b.resize(n - 1);
    out.c.resize(n - 1);
    out.d.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        out.a[i] = y[i];
        out.b[i] = (y[i + 1] - y[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
        out.c[i] = m[i] / 2.0;
        out.d[i] = (m[i + 1] - m[i]) / (6.0 * h[i]);
    }
    return out;
}

CubicSplinePath CubicSplinePath::fit(const TimeSeries& series) {
    series.validate();
    const std::size_t n = series.length();
    const std::size_t u = series.channels();

    CubicSplinePath path;
    path.t_begin_ = series.times.front();
    path.t_end_ = series.times.back();
    path.channels_.resize(u);

    std::vector<double> tx, ty;
    for (std::size_t ch = 0; ch < u; ++ch) {
        tx.clear();
        ty.clear();
        for (std::size_t k = 0; k < n; ++k) {
            const double v = series.features.at(k, ch);
            if (!is_missing(v)) {
                tx.push_back(series.times[k]);
                ty.push_back(v);
            }
        }
        Channel& c = path.channels_[ch];
        if (tx.empty()) {
            c.const_value = 0.0; // fully missing channel pins to zero
        } else if (tx.size() == 1) {
            c.const_value = ty[0];
        } else {
            SplineCoeffs sc = fit_natural_spline_1d(tx, ty);
            c.knots = std::move(sc.knots);
            c.a = std::move(sc.a);
            c.b = std::move(sc.b);
            c.c = std::move(sc.c);
            c.d = std::move(sc.d);
        }
    }
    return path;
}

CubicSplinePath fit_natural_spline(const TimeSeries& series) { return CubicSplinePath::fit(series); }

double CubicSplinePath::check_domain(double t) const {
    // Tolerate end-point rounding from solver arithmetic, nothing more.
    const double slack = 1e-9 * std::max(1.0, std::abs(t_end_ - t_begin_));
    if (t < t_begin_ - slack || t > t_end_ + slack) {
        throw std::domain_error("CubicSplinePath: t=" + std::to_string(t) + " outside [" +
                                std::to_string(t_begin_) + ", " + std::to_string(t_end_) + "]");
    }
    return std::min(std::max(t, t_begin_), t_end_);
}

double CubicSplinePath::eval_channel(std::size_t channel, double t) const {
    t = check_domain(t);
    const Channel& c = channels_.at(channel);
    if (c.knots.size() < 2) return c.const_value;
    if (t <= c.knots.front()) return c.a.front();
    if (t >= c.knots.back()) {
        // Value at the last knot; constant continuation to the domain edge.
        const std::size_t k = c.knots.size() - 2;
        const double s = c.knots.back() - c.knots[k];
        return c.a[k] + s * (c.b[k] + s * (c.c[k] + s * c.d[k]));
    }
    const auto it = std::upper_bound(c.knots.begin(), c.knots.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - c.knots.begin()) - 1;
    const double s = t - c.knots[k];
    return c.a[k] + s * (c.b[k] + s * (c.c[k] + s * c.d[k]));
}

double CubicSplinePath::derivative_channel(std::size_t channel, double t) const {
    t = check_domain(t);
    const Channel& c = channels_.at(channel);
    if (c.knots.size() < 2) return 0.0;
    if (t <= c.knots.front() || t >= c.knots.back()) {
        // Constant continuation outside the observed knot range.
        if (t > c.knots.front() && t == c.knots.back()) {
            const std::size_t k = c.knots.size() - 2;
            const double s = c.knots.back() - c.knots[k];
            return c.b[k] + s * (2.0 * c.c[k] + 3.0 * s * c.d[k]);
        }
        if (t == c.knots.front()) return c.b.front();
        return 0.0;
    }
    const auto it = std::upper_bound(c.knots.begin(), c.knots.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - c.knots.begin()) - 1;
    const double s = t - c.knots[k];
    return c.b[k] + s * (2.0 * c.c[k] + 3.0 * s * c.d[k]);
}

double CubicSplinePath::second_derivative_channel(std::size_t channel, double t,
                                                  bool from_left) const {
    t = check_domain(t);
    const Channel& c = channels_.at(channel);
    if (c.knots.size() < 2) return 0.0;
    if (t <= c.knots.front() || t >= c.knots.back()) {
        const bool at_first = t == c.knots.front() && !from_left;
        const bool at_last = t == c.knots.back() && from_left;
        if (at_first) return 2.0 * c.c.front();
        if (at_last) {
            const std::size_t k = c.knots.size() - 2;
            const double s = c.knots.back() - c.knots[k];
            return 2.0 * c.c[k] + 6.0 * s * c.d[k];
        }
        return 0.0; // constant continuation
    }
    std::size_t k;
    if (from_left) {
        const auto it = std::lower_bound(c.knots.begin(), c.knots.end(), t);
        k = (it != c.knots.end() && *it == t)
                ? static_cast<std::size_t>(it - c.knots.begin()) - 1
                : static_cast<std::size_t>(std::upper_bound(c.knots.begin(), c.knots.end(), t) -
                                           c.knots.begin()) -
                      1;
    } else {
        k = static_cast<std::size_t>(std::upper_bound(c.knots.begin(), c.knots.end(), t) -
                                     c.knots.begin()) -
            1;
    }
    const double s = t - c.knots[k];
    return 2.0 * c.c[k] + 6.0 * s * c.d[k];
}

void CubicSplinePath::eval(double t, std::span<double> out) const {
    if (out.size() != channels_.size()) {
        throw std::invalid_argument("CubicSplinePath::eval: output span size mismatch");
    }
    for (std::size_t ch = 0; ch < channels_.size(); ++ch) out[ch] = eval_channel(ch, t);
}

void CubicSplinePath::eval_derivative(double t, std::span<double> out) const {
    if (out.size() != channels_.size()) {
        throw std::invalid_argument("CubicSplinePath::eval_derivative: output span size mismatch");
    }
    for (std::size_t ch = 0; ch < channels_.size(); ++ch) out[ch] = derivative_channel(ch, t);
}

std::vector<double> CubicSplinePath::eval(double t) const {
    std::vector<double> out(channels_.size());
    eval(t, out);
    return out;
}

std::vector<double> CubicSplinePath::eval_derivative(double t) const {
    std::vector<double> out(channels_.size());
    eval_derivative(t, out);
    return out;
}

} // namespace denots
