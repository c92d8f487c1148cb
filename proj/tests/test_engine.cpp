#include <doctest.h>

#include <cmath>

#include "pointattn/grad_check.hpp"
#include "pointattn/ops.hpp"
#include "pointattn/rng.hpp"
#include "pointattn/selfcheck.hpp"

using namespace pointattn;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool rg = true) {
    Eigen::ArrayXd data(shape_numel(shape));
    for (Eigen::Index i = 0; i < data.size(); ++i) data[i] = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(data), rg);
}

}  // namespace

TEST_CASE("tensor basics and invariants") {
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.at({1, 2}) == 6.0);
    CHECK_THROWS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}));   // data does not fill shape
    CHECK_THROWS(Tensor::zeros({0, 3}));                   // extents must be positive
    CHECK_THROWS(Tensor::from({2, 2}, {1, 2, 3, 4}).value());
}

TEST_CASE("matmul identity and hand arithmetic") {
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor m = Tensor::from({2, 2}, {3, -1, 2, 5});
    Tensor out = matmul(eye, m);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(out.values()[i] == m.values()[i]);

    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from({2, 1}, {1, 1});
    Tensor c = matmul(a, b);
    CHECK(c.at({0, 0}) == doctest::Approx(3.0));
    CHECK(c.at({1, 0}) == doctest::Approx(7.0));

    CHECK_THROWS_WITH_AS(matmul(a, Tensor::zeros({3, 2})), doctest::Contains("[2x2]"),
                         std::invalid_argument);
}

TEST_CASE("pointwise_affine identity and hand case") {
    Rng rng(3);
    Tensor x = rand_tensor({2, 4, 3}, rng);
    Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor zero_b = Tensor::zeros({3});
    Tensor out = pointwise_affine(x, eye, zero_b);
    for (Eigen::Index i = 0; i < x.numel(); ++i) CHECK(out.values()[i] == doctest::Approx(x.values()[i]));

    Tensor ones = Tensor::full({1, 1, 2}, 1.0);
    Tensor w = Tensor::from({2, 1}, {1, 1});
    Tensor b = Tensor::from({1}, {1.0});
    CHECK(pointwise_affine(ones, w, b).value() == doctest::Approx(3.0));

    CHECK_THROWS_AS(pointwise_affine(ones, Tensor::zeros({3, 1}), b), std::invalid_argument);
}

TEST_CASE("batch_norm normalizes and degenerates as expected") {
    BatchNormState bn(1);
    Tensor x = Tensor::from({2, 1}, {1.0, 3.0});
    Tensor out = batch_norm(x, bn, true);
    // mean 2, var 1: eps only perturbs at the 1e-5 level
    CHECK(out.values()[0] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(out.values()[1] == doctest::Approx(1.0).epsilon(1e-4));

    BatchNormState bn_zero(1);
    bn_zero.gamma.values()[0] = 0.0;
    bn_zero.beta.values()[0] = 0.7;
    Tensor out2 = batch_norm(x, bn_zero, true);
    CHECK(out2.values()[0] == doctest::Approx(0.7));
    CHECK(out2.values()[1] == doctest::Approx(0.7));

    CHECK_THROWS_AS(batch_norm(Tensor::zeros({2, 3}), bn, true), std::invalid_argument);
}

TEST_CASE("batch_norm inference uses running statistics") {
    BatchNormState bn(2);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        Tensor x = rand_tensor({8, 2}, rng, 2.0, 4.0, false);
        batch_norm(x, bn, true);
    }
    // running stats converge toward the sampling distribution
    CHECK(bn.running_mean[0] == doctest::Approx(3.0).epsilon(0.2));
    Tensor probe = Tensor::from({1, 2}, {bn.running_mean[0], bn.running_mean[1]});
    Tensor out = batch_norm(probe, bn, false);
    CHECK(out.values()[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(out.values()[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("relu and max_reduce examples") {
    Tensor x = Tensor::from({1, 2}, {-1.0, 2.0});
    Tensor r = relu(x);
    CHECK(r.values()[0] == 0.0);
    CHECK(r.values()[1] == 2.0);

    // max over the S axis of [[1,5],[3,2]] seen as 1 group, S=2, T=2
    Tensor m = Tensor::from({1, 2, 2}, {1, 5, 3, 2});
    Tensor mx = max_reduce(m, 1);
    CHECK(mx.at({0, 0}) == 3.0);
    CHECK(mx.at({0, 1}) == 5.0);

    CHECK_THROWS_AS(max_reduce(m, 3), std::invalid_argument);
}

TEST_CASE("max_reduce routes gradient to exactly one index per group/channel") {
    Tensor x = Tensor::from({2, 3, 2}, {5, 5, 5, 1, 5, 2, 0, 7, 3, 7, 1, 7}, true);
    Tensor loss = sum(max_reduce(x, 1));
    loss.backward();
    const auto& g = x.grad();
    for (Eigen::Index group = 0; group < 2; ++group) {
        for (Eigen::Index ch = 0; ch < 2; ++ch) {
            int nonzero = 0;
            for (Eigen::Index s = 0; s < 3; ++s) {
                if (g[(group * 3 + s) * 2 + ch] != 0.0) ++nonzero;
            }
            CHECK(nonzero == 1);
        }
    }
    // ties break to the lowest S index
    CHECK(x.grad()[0] == 1.0);  // group 0, channel 0, s = 0 (value 5 tied at s=1,2)
}

TEST_CASE("scale with zero factor and its gradient") {
    Rng rng(11);
    Tensor x = rand_tensor({3, 2}, rng);
    Tensor alpha = Tensor::scalar(0.0, true);
    Tensor out = scale(x, alpha);
    for (Eigen::Index i = 0; i < out.numel(); ++i) CHECK(out.values()[i] == 0.0);

    Tensor w = rand_tensor({3, 2}, rng, -1.0, 1.0, false);
    Tensor loss = sum(mul(out, w));
    loss.backward();
    // d loss / d alpha = sum(x * dOut) with dOut = w
    CHECK(alpha.grad()[0] == doctest::Approx((x.values() * w.values()).sum()));
}

TEST_CASE("softmax normalization") {
    Tensor x = Tensor::from({1, 2}, {0.0, 0.0});
    Tensor y = softmax(x, SoftmaxMode::kRow);
    CHECK(y.values()[0] == doctest::Approx(0.5));
    CHECK(y.values()[1] == doctest::Approx(0.5));

    Rng rng(13);
    Tensor r = rand_tensor({4, 5}, rng, -30.0, 30.0, false);
    Tensor yr = softmax(r, SoftmaxMode::kRow);
    for (Eigen::Index row = 0; row < 4; ++row) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < 5; ++c) {
            const double v = yr.at({row, c});
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
    Tensor yg = softmax(r, SoftmaxMode::kGlobal);
    CHECK(std::abs(yg.values().sum() - 1.0) < 1e-9);

    // stabilized against large magnitudes
    Tensor huge = Tensor::from({1, 2}, {1e6, 1e6 + 1.0});
    Tensor yh = softmax(huge, SoftmaxMode::kRow);
    CHECK(std::isfinite(yh.values()[0]));
    CHECK(yh.values().sum() == doctest::Approx(1.0));
}

TEST_CASE("cross_entropy uniform and confident limits") {
    Tensor uniform = Tensor::zeros({3, 4});
    CHECK(cross_entropy(uniform, {0, 1, 3}).value() == doctest::Approx(std::log(4.0)));

    Tensor confident = Tensor::from({2, 3}, {100, 0, 0, 0, 0, 100});
    CHECK(cross_entropy(confident, {0, 2}).value() == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(cross_entropy(uniform, {0, 4, 1}), doctest::Contains("row 1"),
                         std::out_of_range);
}

TEST_CASE("grad_check trivial oracles") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    CHECK(grad_check([](const Tensor& t) { return sum(t); }, x) < 1e-10);

    Tensor x2 = Tensor::from({2}, {1.0, 2.0}, true);
    const auto f = [](const Tensor& t) { return sum(mul(t, t)); };
    CHECK(grad_check(f, x2) < 1e-8);
    x2.zero_grad();
    Tensor y = f(x2);
    y.backward();
    CHECK(x2.grad()[0] == doctest::Approx(2.0));
    CHECK(x2.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("finite-difference suite passes for every op and the full loss") {
    const auto results = selfcheck::gradient_checks(7);
    for (const auto& r : results) {
        INFO(r.name, " max rel err ", r.max_rel_err);
        CHECK(r.max_rel_err < r.tolerance);
    }
    CHECK(selfcheck::all_pass(results));
}

TEST_CASE("backward leaves finite grads everywhere and is deterministic") {
    Rng rng(17);
    Tensor a = rand_tensor({3, 3}, rng);
    Tensor b = rand_tensor({3, 3}, rng);
    const auto run = [&] {
        a.zero_grad();
        b.zero_grad();
        Tensor loss = cross_entropy(matmul(relu(a), softmax(b, SoftmaxMode::kRow)), {0, 1, 2});
        loss.backward();
        return std::make_pair(loss.value(), a.grad().sum() + b.grad().sum());
    };
    const auto first = run();
    const auto second = run();
    CHECK(first.first == second.first);
    CHECK(first.second == second.second);
    CHECK(std::isfinite(first.second));
}
