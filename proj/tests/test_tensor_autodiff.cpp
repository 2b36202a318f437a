#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "denots/autodiff.hpp"
#include "denots/rng.hpp"
#include "denots/tensor.hpp"

#include <cmath>
#include <cstring>
#include <random>

using namespace denots;
using ad::ParamSet;
using ad::Tape;
using ad::Var;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& x : t.data()) x = dist(rng);
    return t;
}

} // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    t.at(1, 2) = 5.0;
    CHECK(t[5] == 5.0);
    CHECK(t.shape_str() == "[2,3]");
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0}), std::invalid_argument);
}

TEST_CASE("elementwise forward examples") {
    Tape tape;
    Var zeros = tape.leaf(Tensor({3}));
    Var t = tape.tanh(zeros);
    for (double x : tape.value(t).data()) CHECK(x == 0.0);

    Var a = tape.leaf(Tensor({2}, {1.0, 2.0}));
    Var b = tape.leaf(Tensor({2}, {3.0, 4.0}));
    Var s = tape.add(a, b);
    CHECK(tape.value(s)[0] == 4.0);
    CHECK(tape.value(s)[1] == 6.0);

    Var sig = tape.sigmoid(tape.leaf(Tensor::scalar(0.0)));
    CHECK(tape.scalar_value(sig) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("shape mismatch reports both shapes") {
    Tape tape;
    Var a = tape.leaf(Tensor({2}));
    Var b = tape.leaf(Tensor({3}));
    CHECK_THROWS_WITH_AS(tape.mul(a, b), doctest::Contains("[2]"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(tape.add(a, b), doctest::Contains("[3]"), std::invalid_argument);
}

TEST_CASE("matvec examples") {
    Tape tape;
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Var w = tape.leaf(eye);
    Var v = tape.leaf(Tensor({3}, {1.0, 2.0, 3.0}));
    Var mv = tape.matvec(w, v);
    CHECK(tape.value(mv)[0] == 1.0);
    CHECK(tape.value(mv)[1] == 2.0);
    CHECK(tape.value(mv)[2] == 3.0);

    Var wz = tape.leaf(Tensor({2, 3}));
    Var mvz = tape.matvec(wz, v);
    CHECK(tape.value(mvz)[0] == 0.0);
    CHECK(tape.value(mvz)[1] == 0.0);

    Var w2 = tape.leaf(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
    Var ones = tape.leaf(Tensor({2}, {1.0, 1.0}));
    Var mv2 = tape.matvec(w2, ones);
    CHECK(tape.value(mv2)[0] == 3.0);
    CHECK(tape.value(mv2)[1] == 7.0);

    CHECK_THROWS_AS(tape.matvec(w2, v), std::invalid_argument);
}

TEST_CASE("backward basics") {
    SUBCASE("x*x at 3 gives 6") {
        Tape tape;
        Var x = tape.leaf(Tensor::scalar(3.0), true);
        Var y = tape.mul(x, x);
        tape.backward(y);
        CHECK(tape.grad(x)[0] == doctest::Approx(6.0));
    }
    SUBCASE("sum(tanh(x)) at 0 gives ones") {
        Tape tape;
        Var x = tape.leaf(Tensor({4}), true);
        Var y = tape.sum(tape.tanh(x));
        tape.backward(y);
        for (double g : tape.grad(x).data()) CHECK(g == doctest::Approx(1.0));
    }
    SUBCASE("disconnected leaf gets zero gradient") {
        Tape tape;
        Var x = tape.leaf(Tensor::scalar(1.0), true);
        Var p = tape.leaf(Tensor({3}, {1.0, 2.0, 3.0}), true);
        Var y = tape.mul(x, x);
        tape.backward(y);
        for (double g : tape.grad(p).data()) CHECK(g == 0.0);
    }
    SUBCASE("non-scalar output rejected") {
        Tape tape;
        Var x = tape.leaf(Tensor({2}), true);
        CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
    }
}

TEST_CASE("every op matches central finite differences on random inputs") {
    // The generic oracle for the whole op table: build a scalar through each
    // op and compare reverse-mode with central differences.
    auto check_fn = [](const ad::LossFn& f, std::uint64_t seed, double kink = 0.0) {
        auto rng = substream(seed, "opcheck");
        ParamSet params;
        params.add("x", random_tensor({4}, rng));
        params.add("w", random_tensor({3, 4}, rng));
        auto report = ad::grad_check(f, params, 1e-5, kink);
        CAPTURE(report.worst_param);
        CAPTURE(report.analytic);
        CAPTURE(report.numeric);
        CHECK(report.max_rel_err < 1e-4);
    };

    check_fn([](Tape& t, const std::vector<Var>& p) { return t.sum(t.tanh(p[0])); }, 1);
    check_fn([](Tape& t, const std::vector<Var>& p) { return t.sum(t.sigmoid(p[0])); }, 2);
    check_fn([](Tape& t, const std::vector<Var>& p) { return t.sum(t.relu(p[0])); }, 3, 1e-4);
    check_fn([](Tape& t, const std::vector<Var>& p) { return t.sum(t.exp(p[0])); }, 4);
    check_fn(
        [](Tape& t, const std::vector<Var>& p) {
            return t.sum(t.log(t.add_const(t.sigmoid(p[0]), 0.5)));
        },
        5);
    check_fn([](Tape& t, const std::vector<Var>& p) { return t.sum(t.mul(p[0], p[0])); }, 6);
    check_fn(
        [](Tape& t, const std::vector<Var>& p) { return t.sum(t.matvec(p[1], p[0])); }, 7);
    check_fn(
        [](Tape& t, const std::vector<Var>& p) {
            return t.mean(t.clamp(p[0], -0.5, 0.5));
        },
        8, 1e-4);
    check_fn(
        [](Tape& t, const std::vector<Var>& p) {
            return t.pick(t.concat(p[0], t.tanh(p[0])), 5);
        },
        9);
    check_fn(
        [](Tape& t, const std::vector<Var>& p) {
            const Var vars[2] = {p[0], t.tanh(p[0])};
            const double w[2] = {0.7, -1.3};
            return t.sum(t.affine(vars, w));
        },
        10);
}

TEST_CASE("grad_check examples from the contract") {
    SUBCASE("random 2-layer tanh net stays under 1e-4") {
        auto rng = substream(42, "net");
        ParamSet params;
        params.add("W1", random_tensor({5, 3}, rng));
        params.add("b1", random_tensor({5}, rng));
        params.add("W2", random_tensor({1, 5}, rng));
        params.add("x", random_tensor({3}, rng));
        auto loss = [](Tape& t, const std::vector<Var>& p) {
            Var h = t.tanh(t.add(t.matvec(p[0], p[3]), p[1]));
            return t.sum(t.matvec(p[2], h));
        };
        auto report = ad::grad_check(loss, params, 1e-5);
        CHECK(report.max_rel_err < 1e-4);
        CHECK(report.checked == params.total_size());
    }
    SUBCASE("linear function is near exact") {
        ParamSet params;
        params.add("x", Tensor({3}, {0.3, -0.7, 1.1}));
        auto loss = [](Tape& t, const std::vector<Var>& p) {
            const Var vars[1] = {p[0]};
            const double w[1] = {2.5};
            return t.sum(t.affine(vars, w));
        };
        auto report = ad::grad_check(loss, params, 1e-5);
        CHECK(report.max_rel_err < 1e-8);
    }
    SUBCASE("constant function has zero gradients both ways") {
        ParamSet params;
        params.add("x", Tensor({3}, {0.3, -0.7, 1.1}));
        auto loss = [](Tape& t, const std::vector<Var>& p) {
            return t.sum(t.scale(p[0], 0.0));
        };
        auto report = ad::grad_check(loss, params, 1e-5);
        CHECK(report.max_rel_err == 0.0);
    }
    SUBCASE("epsilon must be positive") {
        ParamSet params;
        params.add("x", Tensor({1}));
        CHECK_THROWS_AS(
            ad::grad_check([](Tape& t, const std::vector<Var>&) { return t.constant(0.0); },
                           params, 0.0),
            std::invalid_argument);
    }
}

TEST_CASE("tape replay is bit-identical") {
    auto run = [](std::vector<double>* grads_out) {
        auto rng = substream(7, "replay");
        ParamSet params;
        params.add("W", random_tensor({4, 4}, rng));
        params.add("x", random_tensor({4}, rng));
        Tape tape;
        auto leaves = params.make_leaves(tape);
        Var h = tape.tanh(tape.matvec(leaves[0], leaves[1]));
        Var loss = tape.mean(tape.mul(h, h));
        tape.backward(loss);
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            const Tensor& g = tape.grad(leaves[i]);
            grads_out->insert(grads_out->end(), g.data().begin(), g.data().end());
        }
        return tape.scalar_value(loss);
    };
    std::vector<double> ga, gb;
    const double la = run(&ga);
    const double lb = run(&gb);
    CHECK(std::memcmp(&la, &lb, sizeof(double)) == 0);
    REQUIRE(ga.size() == gb.size());
    CHECK(std::memcmp(ga.data(), gb.data(), ga.size() * sizeof(double)) == 0);
}

TEST_CASE("param pack/unpack round trip is identity") {
    auto rng = substream(11, "pack");
    ParamSet params;
    params.add("a", random_tensor({3, 2}, rng));
    params.add("b", random_tensor({5}, rng));
    const std::vector<double> flat = params.pack();
    CHECK(flat.size() == params.total_size());
    ParamSet copy = params;
    std::vector<double> shifted(flat);
    for (double& x : shifted) x += 1.0;
    copy.unpack(shifted);
    copy.unpack(flat);
    CHECK(copy.pack() == flat);
    CHECK_THROWS_AS(copy.unpack(std::vector<double>(3)), std::invalid_argument);
    CHECK_THROWS_AS(params.add("a", Tensor({1})), std::invalid_argument);
}

TEST_CASE("tape rewind keeps earlier nodes intact") {
    Tape tape;
    Var x = tape.leaf(Tensor({2}, {1.0, 2.0}), true);
    const std::size_t mark = tape.size();
    for (int i = 0; i < 10; ++i) {
        Var y = tape.mean(tape.mul(x, x));
        tape.backward(y);
        CHECK(tape.grad(x)[0] == doctest::Approx(1.0));
        tape.rewind(mark);
    }
    CHECK(tape.size() == mark);
    CHECK(tape.value(x)[1] == 2.0);
}
