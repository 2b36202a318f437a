#pragma once

#include "denots/autodiff.hpp"
#include "denots/tensor.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace denots {

struct SolverConfig {
    double rtol = 1e-3;
    double atol = 1e-3;
    double safety = 0.9;
    double min_factor = 0.2;
    double max_factor = 10.0;
    std::size_t max_steps = 100000;
    std::vector<double> output_times; // sorted, inside [0, T]
    std::optional<double> fixed_dt;   // set to disable adaptive control

    void validate(double horizon) const;
};

enum class SolveStatus { Ok, MaxSteps, NonFinite };

template <typename State>
struct SolveResult {
    State final_state{};
    std::vector<State> samples; // one per requested output time
    std::size_t nfe = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    SolveStatus status = SolveStatus::Ok;
    double fail_time = 0.0;
};

struct SolverError : std::runtime_error {
    SolveStatus status;
    double time;
    SolverError(SolveStatus s, double t, const std::string& msg)
        : std::runtime_error(msg), status(s), time(t) {}
};

// ----- state plumbing ---------------------------------------------------

using Vec = std::vector<double>;

inline Vec ode_combine(const Vec& base, double dt, std::span<const double> coeffs,
                       std::span<const Vec> ks) {
    Vec out = base;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double c = dt * coeffs[i];
        if (c == 0.0) continue;
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += c * ks[i][j];
    }
    return out;
}

inline std::span<const double> ode_values(const Vec& v) { return {v.data(), v.size()}; }

inline ad::Var ode_combine(const ad::Var& base, double dt, std::span<const double> coeffs,
                           std::span<const ad::Var> ks) {
    std::vector<ad::Var> vars;
    std::vector<double> w;
    vars.reserve(ks.size() + 1);
    w.reserve(ks.size() + 1);
    vars.push_back(base);
    w.push_back(1.0);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (coeffs[i] == 0.0) continue;
        vars.push_back(ks[i]);
        w.push_back(dt * coeffs[i]);
    }
    return base.tape->affine(vars, w);
}

inline std::span<const double> ode_values(const ad::Var& v) { return v.tape->value(v).data(); }

// ----- Dormand-Prince 5(4) tableau ---------------------------------------

namespace dopri5 {

inline constexpr std::array<double, 7> kC = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0,
                                             8.0 / 9.0, 1.0, 1.0};
inline constexpr std::array<double, 6> kA2 = {1.0 / 5.0};
inline constexpr std::array<double, 6> kA3 = {3.0 / 40.0, 9.0 / 40.0};
inline constexpr std::array<double, 6> kA4 = {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0};
inline constexpr std::array<double, 6> kA5 = {19372.0 / 6561.0, -25360.0 / 2187.0,
                                              64448.0 / 6561.0, -212.0 / 729.0};
inline constexpr std::array<double, 6> kA6 = {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                              49.0 / 176.0, -5103.0 / 18656.0};
// Fifth-order weights; the seventh stage is evaluated at the new state (FSAL).
inline constexpr std::array<double, 6> kB5 = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
                                              -2187.0 / 6784.0, 11.0 / 84.0};
// b5 - b4 over all seven stages, for the embedded error estimate.
inline constexpr std::array<double, 7> kE = {
    71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0,
    -1.0 / 40.0};

} // namespace dopri5

// One Dormand-Prince step with first-same-as-last reuse: given k1 = f(t, y),
// spends exactly six new field evaluations and returns the 5th-order state,
// the next k1 candidate (k7) and the embedded error estimate per component.
template <typename State>
struct Dopri5Step {
    State y_next;
    State k7;
    std::vector<double> error;
};

template <typename State, typename Field>
Dopri5Step<State> dopri5_step(Field&& f, double t, const State& y, const State& k1,
                              double dt) {
    using namespace dopri5;
    if (!(dt > 0.0)) throw std::invalid_argument("dopri5_step: dt must be positive");

    std::vector<State> ks;
    ks.reserve(7);
    ks.push_back(k1);
    const std::array<std::span<const double>, 5> rows = {
        std::span<const double>(kA2.data(), 1), std::span<const double>(kA3.data(), 2),
        std::span<const double>(kA4.data(), 3), std::span<const double>(kA5.data(), 4),
        std::span<const double>(kA6.data(), 5)};
    for (std::size_t stage = 1; stage <= 5; ++stage) {
        State ys = ode_combine(y, dt, rows[stage - 1],
                               std::span<const State>(ks.data(), stage));
        ks.push_back(f(t + kC[stage] * dt, ys));
    }
    State y5 = ode_combine(y, dt, kB5, std::span<const State>(ks.data(), 6));
    ks.push_back(f(t + dt, y5));

    const std::size_t dim = ode_values(y).size();
    std::vector<double> error(dim, 0.0);
    for (std::size_t i = 0; i < 7; ++i) {
        if (kE[i] == 0.0) continue;
        std::span<const double> kv = ode_values(ks[i]);
        for (std::size_t j = 0; j < dim; ++j) error[j] += dt * kE[i] * kv[j];
    }
    return Dopri5Step<State>{std::move(y5), std::move(ks.back()), std::move(error)};
}

namespace detail {

inline double error_norm(std::span<const double> err, std::span<const double> y_old,
                         std::span<const double> y_new, double atol, double rtol) {
    double acc = 0.0;
    for (std::size_t j = 0; j < err.size(); ++j) {
        const double scale = atol + rtol * std::max(std::abs(y_old[j]), std::abs(y_new[j]));
        const double r = err[j] / scale;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

} // namespace detail

// Adaptive integration over [0, horizon], landing exactly on every requested
// output time by shortening steps. Every field evaluation counts toward nfe,
// rejected steps included.
template <typename State, typename Field>
SolveResult<State> integrate(Field&& field, const State& y0, double horizon,
                             const SolverConfig& cfg) {
    cfg.validate(horizon);

    SolveResult<State> res;
    auto f = [&](double t, const State& y) -> State {
        ++res.nfe;
        return field(t, y);
    };

    double t = 0.0;
    State y = y0;
    res.samples.reserve(cfg.output_times.size());
    std::size_t next_out = 0;
    auto emit_samples_at = [&](double now) {
        while (next_out < cfg.output_times.size() && cfg.output_times[next_out] <= now) {
            res.samples.push_back(y);
            ++next_out;
        }
    };
    emit_samples_at(0.0);

    State k1 = f(0.0, y);
    if (!all_finite(ode_values(k1))) {
        res.status = SolveStatus::NonFinite;
        res.fail_time = 0.0;
        res.final_state = std::move(y);
        return res;
    }

    const bool fixed = cfg.fixed_dt.has_value();
    double dt_prop = fixed ? *cfg.fixed_dt
                           : std::min(std::max(horizon / 100.0, 1e-6), horizon);

    while (t < horizon) {
        if (res.accepted + res.rejected >= cfg.max_steps) {
            res.status = SolveStatus::MaxSteps;
            res.fail_time = t;
            res.final_state = std::move(y);
            return res;
        }
        // Shorten to land exactly on the next mandatory time (or the end).
        double t_stop = horizon;
        if (next_out < cfg.output_times.size()) {
            t_stop = std::min(t_stop, cfg.output_times[next_out]);
        }
        const double dt = std::min(dt_prop, t_stop - t);
        const bool lands = dt >= t_stop - t - 1e-14 * std::max(1.0, std::abs(t_stop));

        auto step = dopri5_step(f, t, y, k1, dt);
        std::span<const double> new_vals = ode_values(step.y_next);
        if (!all_finite(new_vals)) {
            res.status = SolveStatus::NonFinite;
            res.fail_time = t;
            res.final_state = std::move(y);
            return res;
        }

        double err = 0.0;
        if (!fixed) {
            err = detail::error_norm(step.error, ode_values(y), new_vals, cfg.atol, cfg.rtol);
        }
        if (fixed || err <= 1.0) {
            ++res.accepted;
            t = lands ? t_stop : t + dt;
            y = std::move(step.y_next);
            k1 = std::move(step.k7);
            emit_samples_at(t);
        } else {
            ++res.rejected;
        }
        if (!fixed) {
            const double shrink =
                err > 0.0 ? cfg.safety * std::pow(err, -0.2) : cfg.max_factor;
            dt_prop = dt * std::min(std::max(shrink, cfg.min_factor), cfg.max_factor);
        }
    }

    emit_samples_at(horizon);
    res.final_state = std::move(y);
    return res;
}

template <typename State, typename Field>
SolveResult<State> integrate_or_throw(Field&& field, const State& y0, double horizon,
                                      const SolverConfig& cfg) {
    SolveResult<State> res = integrate(std::forward<Field>(field), y0, horizon, cfg);
    if (res.status == SolveStatus::MaxSteps) {
        throw SolverError(res.status, res.fail_time,
                          "integrate: exceeded max_steps=" + std::to_string(cfg.max_steps) +
                              " at t=" + std::to_string(res.fail_time));
    }
    if (res.status == SolveStatus::NonFinite) {
        throw SolverError(res.status, res.fail_time,
                          "integrate: non-finite state at t=" + std::to_string(res.fail_time));
    }
    return res;
}

template <typename State>
std::size_t nfe_of(const SolveResult<State>& result) {
    return result.nfe;
}

} // namespace denots
