#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "denots/rng.hpp"
#include "denots/solver.hpp"

#include <cmath>
#include <cstring>

using namespace denots;

namespace {

SolverConfig defaults() { return SolverConfig{}; }

} // namespace

TEST_CASE("single step basics") {
    SUBCASE("zero field keeps the state, zero error") {
        auto f = [](double, const Vec& y) { return Vec(y.size(), 0.0); };
        Vec y0 = {1.0, -2.0};
        Vec k1 = f(0.0, y0);
        auto step = dopri5_step(f, 0.0, y0, k1, 0.3);
        CHECK(step.y_next == y0);
        for (double e : step.error) CHECK(e == 0.0);
    }
    SUBCASE("constant field is exact") {
        auto f = [](double, const Vec& y) { return Vec(y.size(), 2.5); };
        Vec y0 = {1.0};
        auto step = dopri5_step(f, 0.0, y0, f(0.0, y0), 0.4);
        CHECK(step.y_next[0] == doctest::Approx(1.0 + 2.5 * 0.4).epsilon(1e-15));
        CHECK(std::abs(step.error[0]) < 1e-15);
    }
    SUBCASE("six new evaluations per step after the first") {
        std::size_t evals = 0;
        auto f = [&](double, const Vec& y) {
            ++evals;
            return Vec(y.size(), 1.0);
        };
        Vec y0 = {0.0};
        Vec k1 = f(0.0, y0); // 1
        auto s1 = dopri5_step(f, 0.0, y0, k1, 0.1);
        CHECK(evals == 7); // 6 new
        dopri5_step(f, 0.1, s1.y_next, s1.k7, 0.1);
        CHECK(evals == 13);
    }
    CHECK_THROWS_AS(dopri5_step([](double, const Vec& y) { return y; }, 0.0, Vec{1.0}, Vec{1.0}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("exponential decay lands on the closed form") {
    auto f = [](double, const Vec& y) { return Vec{-y[0]}; };
    auto res = integrate_or_throw(f, Vec{1.0}, 1.0, defaults());
    CHECK(res.status == SolveStatus::Ok);
    CHECK(res.final_state[0] == doctest::Approx(std::exp(-1.0)).epsilon(10.0 * 1e-3));
    CHECK(res.nfe >= 6 * res.accepted);
}

TEST_CASE("vector linear field matches e^{-1} per component") {
    auto f = [](double, const Vec& y) {
        Vec out(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) out[i] = -y[i];
        return out;
    };
    auto res = integrate_or_throw(f, Vec(4, 1.0), 1.0, defaults());
    for (double v : res.final_state) CHECK(v == doctest::Approx(std::exp(-1.0)).epsilon(1e-2));
}

TEST_CASE("tightening tolerance never lowers the evaluation count") {
    auto f = [](double, const Vec& y) { return Vec{-y[0]}; };
    std::size_t prev = 0;
    for (double tol : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
        SolverConfig cfg;
        cfg.rtol = tol;
        cfg.atol = tol;
        auto res = integrate_or_throw(f, Vec{1.0}, 1.0, cfg);
        CHECK(res.nfe >= prev);
        prev = res.nfe;
    }
    // Strict growth across the extremes.
    SolverConfig loose, tight;
    loose.rtol = loose.atol = 1e-3;
    tight.rtol = tight.atol = 1e-6;
    CHECK(integrate_or_throw(f, Vec{1.0}, 1.0, tight).nfe >
          integrate_or_throw(f, Vec{1.0}, 1.0, loose).nfe);
}

TEST_CASE("longer horizon costs more evaluations") {
    auto f = [](double t, const Vec& y) { return Vec{std::sin(t) - 0.5 * y[0]}; };
    auto short_run = integrate_or_throw(f, Vec{1.0}, 1.0, defaults());
    auto long_run = integrate_or_throw(f, Vec{1.0}, 20.0, defaults());
    CHECK(nfe_of(long_run) > nfe_of(short_run));
    CHECK(nfe_of(short_run) >= 6);
}

TEST_CASE("mandatory output times are landed on exactly") {
    auto f = [](double t, const Vec& y) { return Vec{std::cos(3.0 * t) - y[0]}; };
    SolverConfig cfg;
    cfg.output_times = {0.5};
    auto res = integrate_or_throw(f, Vec{1.0}, 1.0, cfg);
    REQUIRE(res.samples.size() == 1);

    SolverConfig half;
    auto fresh = integrate_or_throw(f, Vec{1.0}, 0.5, half);
    CHECK(res.samples[0][0] == doctest::Approx(fresh.final_state[0]).epsilon(10.0 * cfg.rtol));

    SUBCASE("sample grid aligns one to one") {
        SolverConfig grid;
        grid.output_times = {0.0, 0.25, 0.5, 0.75, 1.0};
        auto r = integrate_or_throw(f, Vec{1.0}, 1.0, grid);
        CHECK(r.samples.size() == 5);
        CHECK(r.samples[0][0] == 1.0);
        CHECK(r.samples[4][0] == r.final_state[0]);
    }
}

TEST_CASE("fixed-step order check: error shrinks at fifth order") {
    auto f = [](double, const Vec& y) { return Vec{-y[0]}; };
    const double exact = std::exp(-1.0);
    double prev_err = 0.0;
    int k = 0;
    for (double dt : {0.2, 0.1, 0.05, 0.025}) {
        SolverConfig cfg;
        cfg.fixed_dt = dt;
        auto res = integrate_or_throw(f, Vec{1.0}, 1.0, cfg);
        const double err = std::abs(res.final_state[0] - exact);
        if (k > 0) CHECK(prev_err / err >= 16.0);
        prev_err = err;
        ++k;
    }
}

TEST_CASE("identical configuration is bit-identical") {
    auto f = [](double t, const Vec& y) { return Vec{std::sin(2.0 * t) * y[0] - 0.3 * y[0]}; };
    SolverConfig cfg;
    cfg.output_times = {0.3, 0.9};
    auto a = integrate_or_throw(f, Vec{0.7}, 2.0, cfg);
    auto b = integrate_or_throw(f, Vec{0.7}, 2.0, cfg);
    CHECK(std::memcmp(&a.final_state[0], &b.final_state[0], sizeof(double)) == 0);
    CHECK(a.nfe == b.nfe);
    CHECK(a.accepted == b.accepted);
    CHECK(a.rejected == b.rejected);
    CHECK(std::memcmp(&a.samples[1][0], &b.samples[1][0], sizeof(double)) == 0);
}

TEST_CASE("time reversal returns near the start") {
    auto fwd = [](double t, const Vec& y) { return Vec{std::sin(t) - 0.4 * y[0]}; };
    const double horizon = 2.0;
    auto out = integrate_or_throw(fwd, Vec{1.0}, horizon, defaults());
    auto bwd = [&](double t, const Vec& y) {
        Vec g = fwd(horizon - t, y);
        for (double& v : g) v = -v;
        return g;
    };
    auto back = integrate_or_throw(bwd, out.final_state, horizon, defaults());
    CHECK(std::abs(back.final_state[0] - 1.0) < 100.0 * 1e-3);
}

TEST_CASE("failure modes") {
    SUBCASE("max steps carries the partial trajectory") {
        auto f = [](double, const Vec& y) { return Vec{y[0]}; };
        SolverConfig cfg;
        cfg.max_steps = 5;
        cfg.output_times = {1e-4};
        auto res = integrate(f, Vec{1.0}, 100.0, cfg);
        CHECK(res.status == SolveStatus::MaxSteps);
        CHECK(res.samples.size() == 1); // landed on the early output time first
        CHECK_THROWS_AS(integrate_or_throw(f, Vec{1.0}, 100.0, cfg), SolverError);
    }
    SUBCASE("non-finite field output names the time") {
        auto f = [](double t, const Vec& y) {
            return t > 0.4 ? Vec{std::nan("")} : Vec{y[0]};
        };
        auto res = integrate(f, Vec{1.0}, 1.0, defaults());
        CHECK(res.status == SolveStatus::NonFinite);
        try {
            integrate_or_throw(f, Vec{1.0}, 1.0, defaults());
            FAIL("expected SolverError");
        } catch (const SolverError& e) {
            CHECK(std::string(e.what()).find("t=") != std::string::npos);
        }
    }
    SUBCASE("config validation") {
        SolverConfig cfg;
        cfg.rtol = -1.0;
        auto f = [](double, const Vec& y) { return y; };
        CHECK_THROWS_AS(integrate(f, Vec{1.0}, 1.0, cfg), std::invalid_argument);
        SolverConfig cfg2;
        cfg2.output_times = {2.0};
        CHECK_THROWS_AS(integrate(f, Vec{1.0}, 1.0, cfg2), std::invalid_argument);
    }
}

TEST_CASE("tape states integrate and differentiate through the solver") {
    // d h / dt = -w h with a learnable scalar w; d h(T) / d w has the closed
    // form -T w e^{-w T} ... here h(T) = h0 e^{-w T}, so grad = -T h(T).
    ad::Tape tape;
    ad::Var w = tape.leaf(Tensor::scalar(0.8), true);
    ad::Var h0 = tape.leaf(Tensor::scalar(1.5));
    auto field = [&](double, const ad::Var& h) { return tape.neg(tape.mul(w, h)); };
    SolverConfig cfg;
    cfg.rtol = cfg.atol = 1e-9;
    auto res = integrate_or_throw(field, h0, 2.0, cfg);
    const double hT = tape.scalar_value(res.final_state);
    CHECK(hT == doctest::Approx(1.5 * std::exp(-1.6)).epsilon(1e-6));
    tape.backward(res.final_state);
    CHECK(tape.grad(w)[0] == doctest::Approx(-2.0 * hT).epsilon(1e-5));
}
