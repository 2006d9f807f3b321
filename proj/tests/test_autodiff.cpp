#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "notesurv/autodiff.hpp"
#include "oracles.hpp"

using namespace notesurv;
using ad::Tape;

namespace {

ad::ParamStore random_params(const std::vector<std::pair<std::string, std::vector<std::size_t>>>& specs,
                             std::uint64_t seed) {
    ad::ParamStore store;
    Rng rng(seed);
    for (const auto& [name, shape] : specs) {
        Tensor t = Tensor::zeros(shape);
        for (double& x : t.v) x = rng.normal();
        store.add(name, t);
    }
    return store;
}

}  // namespace

TEST_CASE("relu and selu pointwise values") {
    Tape t;
    auto x = t.input(Tensor::matrix(1, 4, {-1.5, 0.0, 1.0, 2.0}));
    auto r = t.relu(x);
    CHECK(t.value(r).v == std::vector<double>{0.0, 0.0, 1.0, 2.0});
    auto s = t.selu(x);
    CHECK(t.value(s).v[1] == 0.0);
    CHECK(t.value(s).v[2] == doctest::Approx(ad::kSeluLambda).epsilon(1e-12));
    CHECK(t.value(s).v[0] ==
          doctest::Approx(ad::kSeluLambda * ad::kSeluAlpha * (std::exp(-1.5) - 1.0)));
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
    Rng rng(2);
    Tensor x = Tensor::zeros({5, 7});
    for (double& v : x.v) v = rng.normal();
    Tensor shifted = x;
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 7; ++c) shifted.at(r, c) += 3.25;

    Tape t;
    auto a = t.softmax_rows(t.input(x));
    auto b = t.softmax_rows(t.input(shifted));
    for (std::size_t r = 0; r < 5; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 7; ++c) {
            s += t.value(a).at(r, c);
            CHECK(t.value(a).at(r, c) ==
                  doctest::Approx(t.value(b).at(r, c)).epsilon(1e-12));
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("dropout: p=0 identity, eval identity, expectation preserved") {
    Rng rng(9);
    Tensor x = Tensor::zeros({1, 10000});
    for (double& v : x.v) v = 1.0;

    Tape t;
    Rng r0(1);
    auto id0 = t.dropout(t.input(x), 0.0, true, r0);
    CHECK(t.value(id0).v == x.v);
    auto id1 = t.dropout(t.input(x), 0.5, false, r0);
    CHECK(t.value(id1).v == x.v);

    const double p = 0.1;
    Rng r1(12345);
    auto d = t.dropout(t.input(x), p, true, r1);
    double mean = 0.0;
    for (double v : t.value(d).v) mean += v;
    mean /= 10000.0;
    // survivors scaled by 1/(1-p): mean stays 1 within 3 standard errors
    double se = std::sqrt(p / (1 - p) / 10000.0);
    CHECK(std::fabs(mean - 1.0) < 3 * se);
}

TEST_CASE("backward: linear map gradient and unused parameter") {
    ad::ParamStore store;
    store.add("w", Tensor::matrix(2, 2, {1, 2, 3, 4}));
    store.add("unused", Tensor::matrix(1, 2, {5, 6}));
    Tape t(&store);
    auto x = t.input(Tensor::matrix(1, 2, {10, 20}));
    auto y = t.matmul(x, t.param("w"));  // 1x2
    auto loss = t.scale(t.mean(y), 2.0);  // sum of y
    t.backward(loss);
    // d(sum(xW))/dW = outer(x, 1)
    CHECK(store.grad("w").v == std::vector<double>{10, 10, 20, 20});
    CHECK(store.grad("unused").v == std::vector<double>{0, 0});
}

TEST_CASE("backward rejects non-scalar loss") {
    Tape t;
    auto x = t.input(Tensor::matrix(1, 2, {1, 2}));
    CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}

TEST_CASE("grad_check: quadratic is exact to roundoff") {
    auto store = random_params({{"theta", {4, 3}}}, 3);
    double err = ad::grad_check(
        [](Tape& t) {
            auto th = t.param("theta");
            // 0.5 * mean(theta^2) via elementwise product with itself
            auto sq = t.matmul(t.transpose(th), th);  // 3x3, diag holds column sums
            return t.scale(t.mean(sq), 0.5);
        },
        store, 1e-5);
    CHECK(err < 1e-8);
}

TEST_CASE("grad_check across every primitive in one composite graph") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto store = random_params({{"a", {3, 4}}, {"b", {4, 5}}, {"c", {1, 5}}}, seed);
        double err = ad::grad_check(
            [seed](Tape& t) {
                auto a = t.param("a");
                auto b = t.param("b");
                auto m = t.matmul(a, b);                    // 3x5
                auto biased = t.add(m, t.param("c"));       // broadcast add
                auto act = t.selu(t.relu(biased));
                auto soft = t.softmax_rows(act);
                auto sig = t.sigmoid(t.concat_cols({soft, act}));
                Rng drop_rng(seed);
                auto dropped = t.dropout(sig, 0.25, true, drop_rng);
                auto tr = t.transpose(dropped);
                auto rows = t.gather_rows(tr, {0, 3, 5});
                return t.mean(t.concat_rows({rows, rows}));
            },
            store, 1e-5);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("bce loss values") {
    Tape t;
    auto p = t.input(Tensor::column({0.5, 0.5}));
    auto l = t.bce_loss(p, {1.0, 0.0});
    CHECK(t.value(l).v[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tape t2;
    auto l2 = t2.bce_loss(t2.input(Tensor::column({0.8})), {1.0});
    CHECK(t2.value(l2).v[0] == doctest::Approx(-std::log(0.8)).epsilon(1e-12));

    Tape t3;
    auto l3 = t3.bce_loss(t3.input(Tensor::column({1.0, 0.0})), {1.0, 0.0});
    CHECK(t3.value(l3).v[0] < 1e-10);

    Tape t4;
    CHECK_THROWS(t4.bce_loss(t4.input(Tensor::column({})), {}));
}

TEST_CASE("pll loss matches the brute-force oracle and shifts cancel") {
    // worked example: times [2,1], both events, h = 0 -> ln(2)/2
    Tape t;
    auto h = t.input(Tensor::column({0.0, 0.0}));
    auto l = t.pll_loss(h, {2.0, 1.0}, {1.0, 1.0});
    CHECK(t.value(l).v[0] == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-12));

    // single event ties out exactly
    Tape t1;
    auto l1 = t1.pll_loss(t1.input(Tensor::column({0.7})), {3.0}, {1.0});
    CHECK(t1.value(l1).v[0] == 0.0);

    Rng rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        std::size_t n = 2 + rng.below(10);
        std::vector<double> h2(n), times(n), events(n);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            h2[i] = rng.normal();
            times[i] = 1.0 + rng.below(4);  // force ties
            events[i] = rng.bernoulli(0.6) ? 1.0 : 0.0;
            any = any || events[i] != 0.0;
        }
        if (!any) events[0] = 1.0;
        Tape tt;
        auto node = tt.pll_loss(tt.input(Tensor::column(h2)), times, events);
        CHECK(tt.value(node).v[0] ==
              doctest::Approx(oracle::pll_brute(h2, times, events)).epsilon(1e-11));

        std::vector<double> h3 = h2;
        for (double& x : h3) x += 17.5;
        Tape ts;
        auto shifted = ts.pll_loss(ts.input(Tensor::column(h3)), times, events);
        CHECK(std::fabs(tt.value(node).v[0] - ts.value(shifted).v[0]) < 1e-12);
    }

    Tape te;
    CHECK_THROWS_WITH(te.pll_loss(te.input(Tensor::column({1.0})), {1.0}, {0.0}),
                      "PLL undefined without observed events");
}

TEST_CASE("adam: zero gradient no-op, descent direction, scalar oracle") {
    ad::ParamStore store;
    store.add("theta", Tensor::scalar(1.0));
    ad::AdamState adam;
    adam.lr = 0.01;

    // zero gradient leaves parameters unchanged
    ad::adam_step(adam, store);
    CHECK(store.value("theta").v[0] == 1.0);

    // one step on f = theta^2/2 decreases theta, matching the oracle
    adam = ad::AdamState{};
    adam.lr = 0.01;
    double m = 0.0, v = 0.0;
    double expect = 1.0;
    for (int step = 1; step <= 5; ++step) {
        double grad = store.value("theta").v[0];
        expect = oracle::adam_scalar_step(expect, grad, 0.01, 0.9, 0.999, 1e-8, m, v, step);
        store.grad("theta").v[0] = grad;
        ad::adam_step(adam, store);
        CHECK(store.value("theta").v[0] == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(store.value("theta").v[0] < 1.0);

    store.grad("theta").v[0] = std::nan("");
    CHECK_THROWS_AS(ad::adam_step(adam, store), std::runtime_error);
}

TEST_CASE("parameter checkpoint round trip") {
    auto store = random_params({{"w", {2, 3}}, {"b", {1, 3}}}, 10);
    std::string text = ad::params_to_json_string(store);
    ad::ParamStore back = ad::params_from_json_string(text);
    CHECK(back.names() == store.names());
    for (const auto& n : store.names()) {
        CHECK(back.value(n).shape == store.value(n).shape);
        CHECK(back.value(n).v == store.value(n).v);
    }
}

TEST_CASE("shape mismatches name the operands") {
    Tape t;
    auto a = t.input(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    auto b = t.input(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    CHECK_THROWS_WITH(t.matmul(a, b), doctest::Contains("(2,3)"));
    auto c = t.input(Tensor::matrix(1, 2, {1, 2}));
    CHECK_THROWS_WITH(t.add(a, c), doctest::Contains("(1,2)"));
}
