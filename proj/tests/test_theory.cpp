#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "denots/rng.hpp"
#include "denots/theory.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace denots;
using theory::BoundedSignal;
using theory::ConstrainedField;
using theory::GpKernel;

TEST_CASE("spectral norm matches a dense SVD oracle") {
    auto rng = substream(1, "svd");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor m({32, 32});
        for (double& x : m.data()) x = gauss(rng);
        Eigen::MatrixXd em(32, 32);
        for (int i = 0; i < 32; ++i) {
            for (int j = 0; j < 32; ++j) em(i, j) = m.at(i, j);
        }
        const double oracle = Eigen::JacobiSVD<Eigen::MatrixXd>(em).singularValues()(0);
        CHECK(theory::spectral_norm(m) == doctest::Approx(oracle).epsilon(1e-6));
    }
}

TEST_CASE("constrained field") {
    auto rng = substream(2, "cf");
    SUBCASE("zero maps to zero bit-exactly") {
        const auto f = ConstrainedField::random_assumption2(8, 3, rng);
        const Vec out = f.eval(std::vector<double>(3, 0.0), std::vector<double>(8, 0.0));
        for (double v : out) CHECK(v == 0.0);
    }
    SUBCASE("random draws satisfy assumption 2 with exact Lipschitz targets") {
        for (int rep = 0; rep < 10; ++rep) {
            const auto f = ConstrainedField::random_assumption2(8, 3, rng);
            CHECK(f.assumption2());
            CHECK(theory::spectral_norm(f.w_h) == doctest::Approx(f.lip_hidden).epsilon(1e-9));
            CHECK(theory::spectral_norm(f.w_x) == doctest::Approx(f.lip_input).epsilon(1e-9));
        }
    }
    SUBCASE("the Lyapunov gain is linear in its argument") {
        const auto f = ConstrainedField::random_assumption2(8, 3, rng);
        CHECK(theory::iss_gain(f, 2.0) == doctest::Approx(2.0 * theory::iss_gain(f, 1.0)));
        CHECK(theory::iss_gain(f, 6.0) == doctest::Approx(3.0 * theory::iss_gain(f, 2.0)));
    }
}

TEST_CASE("iss check") {
    auto rng = substream(3, "iss");
    SUBCASE("zero input decays monotonically and holds the bound") {
        const auto f = ConstrainedField::random_assumption2(8, 2, rng);
        Vec h0(8, 0.5);
        const auto input = BoundedSignal::zero(2);
        const auto report = theory::iss_check(f, input, h0, 0.0, 20.0);
        CHECK(report.ok);
        for (std::size_t i = 1; i < report.trace.size(); ++i) {
            CHECK(report.trace[i].second <= report.trace[i - 1].second * (1.0 + 1e-9));
        }
    }
    SUBCASE("zero input and zero start stay at the equilibrium") {
        const auto f = ConstrainedField::random_assumption2(6, 2, rng);
        const auto report = theory::iss_check(f, BoundedSignal::zero(2), Vec(6, 0.0), 0.0, 5.0);
        CHECK(report.max_norm == 0.0);
    }
    SUBCASE("bounded random inputs respect the level over several draws") {
        for (int rep = 0; rep < 10; ++rep) {
            const auto f = ConstrainedField::random_assumption2(8, 2, rng);
            const double x_max = 1.5;
            const double horizon = 5.0 / (f.b - f.a * f.lip_hidden);
            const auto input = BoundedSignal::random(2, x_max, horizon, rng);
            std::uniform_real_distribution<double> h0_dist(-1.0, 1.0);
            Vec h0(8);
            for (double& x : h0) x = h0_dist(rng);
            const auto report = theory::iss_check(f, input, h0, x_max, horizon);
            CAPTURE(report.level);
            CAPTURE(report.max_norm);
            CHECK(report.ok);
        }
    }
    SUBCASE("assumption-2 violations are rejected") {
        ConstrainedField f;
        f.a = 1.5;
        f.b = 0.5;
        f.w_h = Tensor({2, 2});
        f.w_x = Tensor({2, 1});
        f.lip_hidden = 0.5;
        f.lip_input = 1.0;
        CHECK_THROWS_AS(theory::iss_check(f, BoundedSignal::zero(1), Vec(2, 0.0), 1.0, 1.0),
                        std::invalid_argument);
    }
}

TEST_CASE("forgetting decay") {
    SUBCASE("pure decay matches exp(-b tau)") {
        ConstrainedField f;
        f.a = 0.0;
        f.b = 0.4;
        f.w_h = Tensor({3, 3});
        f.w_x = Tensor({3, 1});
        f.lip_hidden = 0.5;
        f.lip_input = 0.0;
        std::vector<double> xbuf(1, 0.0);
        theory::OdeField field = [&](double, const Vec& h) { return f.eval(xbuf, h); };
        const auto report = theory::forgetting_decay(field, Vec(3, 0.3), 1, 1e-4, 6.0);
        CHECK(report.strictly_decreasing);
        for (std::size_t i = 0; i < report.taus.size(); ++i) {
            CHECK(report.sensitivity[i] ==
                  doctest::Approx(std::exp(-f.b * report.taus[i])).epsilon(1e-5));
        }
    }
    SUBCASE("random assumption-2 configurations decay strictly") {
        auto rng = substream(4, "forget");
        for (int rep = 0; rep < 10; ++rep) {
            const auto f = ConstrainedField::random_assumption2(6, 2, rng);
            const double horizon = std::min(3.0 / (f.b - f.a * f.lip_hidden), 40.0);
            const auto input = BoundedSignal::random(2, 1.0, horizon, rng);
            std::vector<double> xbuf(2);
            theory::OdeField field = [&](double t, const Vec& h) {
                input.eval(t, xbuf);
                return f.eval(xbuf, h);
            };
            std::uniform_real_distribution<double> h0_dist(-1.0, 1.0);
            Vec h0(6);
            for (double& x : h0) x = h0_dist(rng);
            const auto report =
                theory::forgetting_decay(field, h0, static_cast<std::size_t>(rep % 6), 1e-4,
                                         horizon);
            CHECK(report.strictly_decreasing);
        }
    }
    SUBCASE("anti-NF with an open update gate forgets slower than sync-NF") {
        const std::size_t v = 8;
        auto anti = init_field_params(FieldKind::AntiNF, 2, v, 5);
        for (double& b : anti["b_iz"].data()) b = -20.0; // z ~ 0: decay gate shut
        auto sync = init_field_params(FieldKind::SyncNF, 2, v, 5);
        const std::vector<double> x0 = {0.1, -0.2};
        auto wrap = [&](FieldKind kind, const ad::ParamSet& p) {
            return theory::OdeField([&p, kind, x0](double, const Vec& h) {
                Vec dh(h.size());
                eval_field(kind, p, x0, h, dh);
                return dh;
            });
        };
        const Vec h0(v, 0.4);
        const auto fast = theory::forgetting_decay(wrap(FieldKind::SyncNF, sync), h0, 0, 1e-4, 4.0);
        const auto slow = theory::forgetting_decay(wrap(FieldKind::AntiNF, anti), h0, 0, 1e-4, 4.0);
        CHECK(slow.sensitivity.back() > fast.sensitivity.back());
    }
}

TEST_CASE("robustness bound and the tightness example") {
    SUBCASE("identical inputs give zero gap") {
        auto rng = substream(6, "robust");
        const auto f = ConstrainedField::random_assumption2(6, 2, rng);
        const auto input = BoundedSignal::random(2, 1.0, 10.0, rng);
        const auto report = theory::robustness_gap(f, input, input, Vec(6, 0.1), 10.0);
        CHECK(report.sigma_pw == 0.0);
        CHECK(report.max_gap_sq <= 1e-12);
        CHECK(report.ok);
    }
    SUBCASE("constant-input example approaches (A-B)^2/eps^2 and stays below it") {
        const auto report = theory::tightness_example(2.0, 1.0, 0.5, 40.0);
        CHECK(report.asymptote == doctest::Approx(4.0));
        CHECK(report.final_gap_sq == doctest::Approx(4.0).epsilon(0.05));
        CHECK(report.within_bound);
        // monotone approach from below
        for (std::size_t i = 1; i < report.trace.size(); ++i) {
            CHECK(report.trace[i].second >= report.trace[i - 1].second - 1e-12);
        }
    }
    SUBCASE("different constant inputs respect the general bound") {
        auto rng = substream(7, "robust2");
        const auto f = ConstrainedField::random_assumption2(6, 2, rng);
        const auto a = BoundedSignal::constant(2, 0.8);
        const auto b = BoundedSignal::constant(2, 0.3);
        const double horizon = 20.0 / (f.b - f.a * f.lip_hidden);
        const auto report = theory::robustness_gap(f, a, b, Vec(6, 0.0), horizon);
        CHECK(report.ok);
        CHECK(report.max_gap_sq > 0.0);
    }
}

TEST_CASE("gp posterior variance") {
    const GpKernel kernel{GpKernel::Kind::SquaredExponential, 1.0, 0.0, 0.0};
    const std::vector<double> times = {0.0, 0.3, 0.7, 1.0};
    SUBCASE("zero at an observed point") {
        CHECK(std::abs(gp_posterior_variance(kernel, times, 0.3)) < 1e-8);
    }
    SUBCASE("prior variance with no observations") {
        CHECK(gp_posterior_variance(kernel, std::vector<double>{}, 0.5) == 1.0);
    }
    SUBCASE("far queries recover the prior") {
        CHECK(gp_posterior_variance(kernel, times, 50.0) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("between points the variance is positive and below the prior") {
        const double v = gp_posterior_variance(kernel, std::vector<double>{0.0, 1.0}, 0.5);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    SUBCASE("duplicated observations make the Gram singular") {
        CHECK_THROWS_AS(
            gp_posterior_variance(kernel, std::vector<double>{0.2, 0.2, 0.9}, 0.5),
            theory::SingularGramError);
    }
    SUBCASE("quartic kernels have no closed-form covariance") {
        GpKernel quartic;
        quartic.kind = GpKernel::Kind::QuarticSpectral;
        CHECK_THROWS_AS(gp_posterior_variance(quartic, times, 0.5), std::invalid_argument);
        CHECK(quartic.spectral_density(0.0) ==
              doctest::Approx(quartic.q / std::pow(quartic.xi, 4.0)));
    }
}

TEST_CASE("assumption monte carlo") {
    SUBCASE("zero shift keeps variances exactly equal") {
        const GpKernel kernel{GpKernel::Kind::SquaredExponential, 1.0, 0.0, 0.0};
        const std::vector<double> times = {0.0, 0.2, 0.5, 0.8, 1.0};
        const double a = gp_posterior_variance(kernel, times, 0.4, 1e-9);
        const double b = gp_posterior_variance(kernel, times, 0.4, 1e-9);
        CHECK(std::abs(a - b) < 1e-10);
    }
    SUBCASE("single iterations are reproducible") {
        const auto a = theory::assumption_test_mc(1, 42);
        const auto b = theory::assumption_test_mc(1, 42);
        CHECK(a.worst_margin == b.worst_margin);
        CHECK(a.failures == b.failures);
    }
    SUBCASE("a fast hundred iterations run clean") {
        const auto report = theory::assumption_test_mc(100, 7);
        CHECK(report.iterations == 100);
        CHECK(report.failures == 0);
    }
}

TEST_CASE("spline interval error") {
    SUBCASE("the limit constant evaluates to about 10.7119") {
        const double c = 4.0 * std::pow(3.14159265358979323846, 4.0) * std::sqrt(3.0) / 63.0;
        CHECK(theory::kSplineIntervalConstant == doctest::Approx(c).epsilon(1e-12));
        CHECK(theory::kSplineIntervalConstant == doctest::Approx(10.7119).epsilon(1e-4));
    }
    SUBCASE("a small Monte Carlo run lands near the numeric limit") {
        theory::SplineErrorConfig cfg;
        cfg.xi = 0.005;
        cfg.delta = 1.0;
        cfg.paths = 40;
        cfg.features = 2048;
        cfg.knots = 32;
        cfg.seed = 3;
        const auto report = theory::spline_error_mc(cfg);
        CAPTURE(report.constant_estimate);
        CHECK(report.constant_estimate ==
              doctest::Approx(theory::kSplineIntervalLimit).epsilon(0.10));
        CHECK(report.constant_estimate ==
              doctest::Approx(theory::kSplineIntervalConstant).epsilon(0.25));
    }
    SUBCASE("prior variance of the quartic kernel matches the analytic integral") {
        GpKernel k;
        k.kind = GpKernel::Kind::QuarticSpectral;
        k.xi = 0.2;
        k.q = 2.0;
        // integral of Q/(w^4 + xi^4) = pi Q / (sqrt(2) xi^3)
        CHECK(k.prior_variance() ==
              doctest::Approx(2.0 * 3.14159265358979 / (std::sqrt(2.0) * 0.008)).epsilon(1e-9));
    }
}
