#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "denots/dynamics.hpp"
#include "denots/rng.hpp"

#include <cmath>
#include <random>

using namespace denots;

namespace {

ad::ParamSet zero_gru(std::size_t input, std::size_t hidden) {
    ad::ParamSet p = init_field_params(FieldKind::NoNF, input, hidden, 0);
    for (auto& e : p.entries()) {
        for (double& x : e.value.data()) x = 0.0;
    }
    return p;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                               double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

} // namespace

TEST_CASE("scale_times") {
    TimeSeries s;
    s.times = {0.0, 2.0, 4.0};
    s.features = Tensor({3, 1}, {1.0, 2.0, 3.0});
    SUBCASE("direct formula") {
        TimeSeries out = scale_times(s, ScaleConfig{10.0, 4.0});
        CHECK(out.times == std::vector<double>{0.0, 5.0, 10.0});
        CHECK(out.features.at(1, 0) == 2.0);
    }
    SUBCASE("D equal to M is the identity") {
        TimeSeries out = scale_times(s, ScaleConfig{4.0, 4.0});
        CHECK(out.times == s.times);
    }
    SUBCASE("median normalizer gives unit-median timeframes") {
        // Three series with timeframes 2, 4, 8; M = 4 maps the median one to 1.
        std::vector<double> frames = {2.0, 4.0, 8.0};
        ScaleConfig cfg{1.0, 4.0};
        std::vector<double> scaled;
        for (double f : frames) scaled.push_back(f * cfg.factor());
        CHECK(scaled[1] == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(scale_times(s, ScaleConfig{0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("gru gates") {
    SUBCASE("zero parameters give r = z = 1/2, n = 0") {
        auto p = zero_gru(2, 3);
        auto g = gru_gates(p, std::vector<double>{0.4, -0.2}, std::vector<double>{1.0, -1.0, 0.5});
        for (double r : g.r) CHECK(r == 0.5);
        for (double z : g.z) CHECK(z == 0.5);
        for (double n : g.n) CHECK(n == 0.0);
    }
    SUBCASE("gates stay inside their ranges") {
        auto rng = substream(1, "gates");
        auto p = init_field_params(FieldKind::NoNF, 4, 8, 123);
        for (int rep = 0; rep < 20; ++rep) {
            auto x = random_vec(4, rng, -3.0, 3.0);
            auto h = random_vec(8, rng, -3.0, 3.0);
            auto g = gru_gates(p, x, h);
            for (double z : g.z) {
                CHECK(z > 0.0);
                CHECK(z < 1.0);
            }
            for (double r : g.r) {
                CHECK(r > 0.0);
                CHECK(r < 1.0);
            }
            for (double n : g.n) CHECK(std::abs(n) < 1.0);
        }
    }
    SUBCASE("scalar wiring z = sigmoid(ln 3) = 0.75") {
        auto p = zero_gru(1, 1);
        p["W_iz"].at(0, 0) = 1.0;
        auto g = gru_gates(p, std::vector<double>{std::log(3.0)}, std::vector<double>{0.0});
        CHECK(g.z[0] == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("shape mismatch") {
        auto p = zero_gru(2, 3);
        CHECK_THROWS_AS(gru_gates(p, std::vector<double>{1.0}, std::vector<double>{0.0, 0.0, 0.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("vector fields with zero parameters reduce to +-h/2") {
    auto p = zero_gru(2, 3);
    const std::vector<double> x = {0.3, -0.9};
    const std::vector<double> h = {1.0, -2.0, 0.5};
    auto no_nf = eval_field(FieldKind::NoNF, p, x, h);
    auto sync = eval_field(FieldKind::SyncNF, p, x, h);
    auto anti = eval_field(FieldKind::AntiNF, p, x, h);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(no_nf[i] == doctest::Approx(0.5 * h[i]).epsilon(1e-15));
        CHECK(sync[i] == doctest::Approx(-0.5 * h[i]).epsilon(1e-15));
        CHECK(anti[i] == doctest::Approx(-0.5 * h[i]).epsilon(1e-15));
    }
}

TEST_CASE("anti-NF equals the gate identity with negated hidden input") {
    auto rng = substream(2, "anti");
    auto p = init_field_params(FieldKind::AntiNF, 3, 5, 77);
    for (int rep = 0; rep < 10; ++rep) {
        auto x = random_vec(3, rng);
        auto h = random_vec(5, rng);
        std::vector<double> neg_h(5);
        for (std::size_t i = 0; i < 5; ++i) neg_h[i] = -h[i];
        auto g = gru_gates(p, x, neg_h);
        auto field = eval_field(FieldKind::AntiNF, p, x, h);
        for (std::size_t i = 0; i < 5; ++i) {
            const double expected = (1.0 - g.z[i]) * g.n[i] + g.z[i] * neg_h[i];
            CHECK(field[i] == expected); // same floating-point path, exact
        }
    }
}

TEST_CASE("sync-NF vanishes when n equals h") {
    auto p = zero_gru(1, 2);
    const double c = 0.42;
    p["b_in"][0] = std::atanh(c);
    p["b_in"][1] = std::atanh(c);
    const std::vector<double> h = {c, c};
    auto g = gru_gates(p, std::vector<double>{0.0}, h);
    CHECK(g.n[0] == doctest::Approx(c).epsilon(1e-15));
    auto field = eval_field(FieldKind::SyncNF, p, std::vector<double>{0.0}, h);
    for (double f : field) CHECK(std::abs(f) < 1e-15);
}

TEST_CASE("anti-NF with saturated z decays toward -h") {
    auto p = zero_gru(2, 4);
    for (double& b : p["b_iz"].data()) b = 20.0;
    const std::vector<double> x = {0.1, 0.2};
    const std::vector<double> h = {0.7, -0.3, 1.2, -0.8};
    auto field = eval_field(FieldKind::AntiNF, p, x, h);
    double err = 0.0;
    for (std::size_t i = 0; i < 4; ++i) err += (field[i] + h[i]) * (field[i] + h[i]);
    CHECK(std::sqrt(err) < 1e-6);
}

TEST_CASE("mlp fields") {
    auto p = init_field_params(FieldKind::MlpTanh, 2, 4, 5);
    SUBCASE("zero weights give zero output") {
        for (auto& e : p.entries()) {
            for (double& x : e.value.data()) x = 0.0;
        }
        auto out = eval_field(FieldKind::MlpTanh, p, std::vector<double>{1.0, -1.0},
                              std::vector<double>{0.5, 0.5, 0.5, 0.5});
        for (double v : out) CHECK(v == 0.0);
    }
    SUBCASE("tanh output is bounded by one") {
        auto rng = substream(9, "mlp");
        for (int rep = 0; rep < 20; ++rep) {
            auto x = random_vec(2, rng, -5.0, 5.0);
            auto h = random_vec(4, rng, -5.0, 5.0);
            auto out = eval_field(FieldKind::MlpTanh, p, x, h);
            for (double v : out) CHECK(std::abs(v) < 1.0);
        }
    }
    SUBCASE("relu dying region") {
        auto q = init_field_params(FieldKind::MlpRelu, 1, 2, 5);
        for (auto& e : q.entries()) {
            for (double& x : e.value.data()) x = 0.0;
        }
        // First layer passes the (negative) input through; relu kills it.
        q["W1"].at(0, 0) = 1.0;
        q["W1"].at(1, 0) = 1.0;
        q["W2"].at(0, 0) = 1.0;
        q["W2"].at(1, 1) = 1.0;
        auto out = eval_field(FieldKind::MlpRelu, q, std::vector<double>{-3.0},
                              std::vector<double>{0.0, 0.0});
        for (double v : out) CHECK(v == 0.0);
    }
}

TEST_CASE("tape and raw field paths agree exactly") {
    auto rng = substream(4, "consistency");
    for (FieldKind kind : {FieldKind::NoNF, FieldKind::SyncNF, FieldKind::AntiNF,
                           FieldKind::MlpTanh, FieldKind::MlpRelu}) {
        auto p = init_field_params(kind, 3, 6, 2024);
        for (int rep = 0; rep < 5; ++rep) {
            auto x = random_vec(3, rng);
            auto h = random_vec(6, rng);
            auto raw = eval_field(kind, p, x, h);

            ad::Tape tape;
            auto field = make_field_leaves(kind, p, tape);
            ad::Var xv = tape.leaf(Tensor({3}, x));
            ad::Var hv = tape.leaf(Tensor({6}, h));
            ad::Var out = eval_field(tape, field, xv, hv);
            for (std::size_t i = 0; i < 6; ++i) {
                CHECK(tape.value(out)[i] == raw[i]);
            }
        }
    }
}

TEST_CASE("lipschitz budget") {
    CHECK(lipschitz_budget(1.0, 1.0, 1.0) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
    // First-order behavior for tiny horizons.
    CHECK(lipschitz_budget(2.0, 1.0, 1e-8) == doctest::Approx(2.0 * 1e-8).epsilon(1e-6));
    CHECK_THROWS_AS(lipschitz_budget(1.0, -1.0, 1.0), std::invalid_argument);

    SUBCASE("monotone in horizon and input constant") {
        double prev = 0.0;
        for (double t : {0.5, 1.0, 2.0, 4.0}) {
            const double lf = lipschitz_budget(1.0, 0.7, t);
            CHECK(lf > prev);
            prev = lf;
        }
        CHECK(lipschitz_budget(2.0, 0.7, 1.0) > lipschitz_budget(1.0, 0.7, 1.0));
    }
    SUBCASE("doubling the horizon allows a smaller hidden constant") {
        // Budget must exceed the M_h -> 0 floor of M_x * T at both horizons.
        const double budget = lipschitz_budget(1.0, 2.0, 1.0);
        const double mh1 = hidden_lipschitz_for_budget(budget, 1.0, 1.0);
        const double mh2 = hidden_lipschitz_for_budget(budget, 1.0, 2.0);
        CHECK(mh1 == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(mh2 < mh1);
        CHECK(lipschitz_budget(1.0, mh2, 2.0) == doctest::Approx(budget).epsilon(1e-6));
    }
}
