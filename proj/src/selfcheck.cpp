#include "pointattn/selfcheck.hpp"

#include <algorithm>
#include <numeric>

#include "pointattn/grad_check.hpp"
#include "pointattn/model.hpp"
#include "pointattn/ops.hpp"
#include "pointattn/rng.hpp"

namespace pointattn::selfcheck {

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = true) {
    Eigen::ArrayXd data(shape_numel(shape));
    for (Eigen::Index i = 0; i < data.size(); ++i) data[i] = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(data), requires_grad);
}

// Values with pairwise gaps well above the finite-difference step, so
// kinked ops (relu, max) stay on one side of their breakpoints.
Tensor spaced_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
    const Eigen::Index n = shape_numel(shape);
    std::vector<Eigen::Index> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.next_below(i)]);
    Eigen::ArrayXd data(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        data[i] = 0.05 * static_cast<double>(perm[static_cast<size_t>(i)]) - 0.02 * static_cast<double>(n);
    }
    return Tensor::from(std::move(shape), std::move(data), requires_grad);
}

// Reduce an op output to a scalar through fixed random weights so the
// check exercises the whole Jacobian.
std::function<Tensor(const Tensor&)> weighted(const std::function<Tensor(const Tensor&)>& op,
                                              Shape out_shape, Rng& rng) {
    Tensor w = rand_tensor(std::move(out_shape), rng, -1.0, 1.0, false);
    return [op, w](const Tensor& x) { return sum(mul(op(x), w)); };
}

}  // namespace

std::vector<CheckResult> gradient_checks(std::uint64_t seed) {
    std::vector<CheckResult> results;
    Rng rng(derive_seed(seed, 0x6c));
    const auto record = [&](const std::string& name, double err) {
        results.push_back({name, err, 1e-4, err < 1e-4});
    };

    {
        Tensor a = rand_tensor({5, 4}, rng, -1.0, 1.0);
        Tensor b = rand_tensor({4, 3}, rng, -1.0, 1.0);
        record("matmul/lhs", grad_check(weighted([b](const Tensor& x) { return matmul(x, b); }, {5, 3}, rng), a));
        record("matmul/rhs", grad_check(weighted([a](const Tensor& x) { return matmul(a, x); }, {5, 3}, rng), b));
    }
    {
        Tensor a = rand_tensor({4, 6}, rng, -1.0, 1.0);
        record("transpose", grad_check(weighted([](const Tensor& x) { return transpose(x); }, {6, 4}, rng), a));
        record("reshape", grad_check(weighted([](const Tensor& x) { return reshape(x, {2, 3, 4}); }, {2, 3, 4}, rng), a));
    }
    {
        Tensor x = rand_tensor({2, 3, 4}, rng, -1.0, 1.0);
        Tensor w = rand_tensor({4, 2}, rng, -1.0, 1.0);
        Tensor b = rand_tensor({2}, rng, -0.5, 0.5);
        record("pointwise_affine/x", grad_check(weighted([w, b](const Tensor& t) { return pointwise_affine(t, w, b); }, {2, 3, 2}, rng), x));
        record("pointwise_affine/w", grad_check(weighted([x, b](const Tensor& t) { return pointwise_affine(x, t, b); }, {2, 3, 2}, rng), w));
        record("pointwise_affine/b", grad_check(weighted([x, w](const Tensor& t) { return pointwise_affine(x, w, t); }, {2, 3, 2}, rng), b));
    }
    {
        Tensor x = rand_tensor({4, 3}, rng, -1.0, 1.0);
        BatchNormState bn(3);
        bn.gamma.values() << 1.2, 0.7, 1.5;
        bn.beta.values() << 0.1, -0.2, 0.3;
        const auto run = [&bn](const Tensor& t) { return batch_norm(t, bn, true); };
        record("batch_norm/x", grad_check(weighted(run, {4, 3}, rng), x));
        record("batch_norm/gamma",
               grad_check(weighted([&bn, x](const Tensor&) { return batch_norm(x, bn, true); }, {4, 3}, rng),
                          bn.gamma));
        record("batch_norm/beta",
               grad_check(weighted([&bn, x](const Tensor&) { return batch_norm(x, bn, true); }, {4, 3}, rng),
                          bn.beta));
    }
    {
        Tensor x = spaced_tensor({3, 4}, rng);
        record("relu", grad_check(weighted([](const Tensor& t) { return relu(t); }, {3, 4}, rng), x));
    }
    {
        Tensor x = spaced_tensor({2, 4, 3}, rng);
        record("max_reduce", grad_check(weighted([](const Tensor& t) { return max_reduce(t, 1); }, {2, 3}, rng), x));
    }
    {
        Tensor a = rand_tensor({2, 3}, rng, -1.0, 1.0);
        Tensor b = rand_tensor({2, 3}, rng, -1.0, 1.0);
        record("add", grad_check(weighted([b](const Tensor& t) { return add(t, b); }, {2, 3}, rng), a));
        record("mul", grad_check(weighted([b](const Tensor& t) { return mul(t, b); }, {2, 3}, rng), a));
        Tensor alpha = Tensor::scalar(0.8, true);
        record("scale/x", grad_check(weighted([alpha](const Tensor& t) { return scale(t, alpha); }, {2, 3}, rng), a));
        record("scale/factor",
               grad_check(weighted([a](const Tensor& t) { return scale(a, t); }, {2, 3}, rng), alpha));
        record("sum", grad_check([](const Tensor& t) { return sum(t); }, a));
    }
    {
        Tensor a = rand_tensor({2, 2, 3}, rng, -1.0, 1.0);
        Tensor b = rand_tensor({2, 2, 2}, rng, -1.0, 1.0);
        record("concat_channels",
               grad_check(weighted([b](const Tensor& t) { return concat_channels(t, b); }, {2, 2, 5}, rng), a));
    }
    {
        Tensor src = rand_tensor({5, 3}, rng, -1.0, 1.0);
        std::vector<Eigen::Index> idx = {0, 2, 4, 2, 1, 0};
        record("gather_rows",
               grad_check(weighted([idx](const Tensor& t) { return gather_rows(t, idx, {2, 3}); }, {2, 3, 3}, rng),
                          src));
        InterpPlan plan;
        plan.indices.resize(4, 2);
        plan.indices << 0, 1, 2, 3, 4, 0, 1, 2;
        plan.weights.resize(4, 2);
        plan.weights << 0.3, 0.7, 0.5, 0.5, 0.9, 0.1, 0.2, 0.8;
        record("apply_interpolation",
               grad_check(weighted([plan](const Tensor& t) { return apply_interpolation(t, plan); }, {4, 3}, rng),
                          src));
    }
    {
        Tensor x = rand_tensor({3, 3}, rng, -1.0, 1.0);
        record("softmax/row",
               grad_check(weighted([](const Tensor& t) { return softmax(t, SoftmaxMode::kRow); }, {3, 3}, rng), x));
        record("softmax/global",
               grad_check(weighted([](const Tensor& t) { return softmax(t, SoftmaxMode::kGlobal); }, {3, 3}, rng), x));
    }
    {
        Tensor s = rand_tensor({5, 3}, rng, -1.0, 1.0);
        const std::vector<int> labels = {0, 2, 1, 2, 0};
        record("cross_entropy", grad_check([labels](const Tensor& t) { return cross_entropy(t, labels); }, s));
    }

    // Full network loss on a two-group micro instance: every parameter
    // (randomized so no branch is inert) and the input features.
    {
        model::ModelConfig cfg;
        cfg.group_counts = {2};
        cfg.radii = {{0.6, 1.2}};
        cfg.group_sizes = {4};
        cfg.sa_kernels = {{3, 3, 4}};
        cfg.fp_kernels = {{4, 4, 4}};
        cfg.classifier_width = 4;
        cfg.attention_reduction = 2;
        cfg.num_classes = 3;
        model::Network net(cfg, seed);
        for (auto& p : net.parameters()) {
            auto& v = p.tensor.values();
            const bool is_gamma = p.name.size() > 5 && p.name.rfind("gamma") == p.name.size() - 5;
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                v[i] = is_gamma ? rng.uniform(0.6, 1.4) : rng.uniform(-0.5, 0.5);
            }
        }

        geom::Coord coords(8, 3);
        for (Eigen::Index i = 0; i < 8; ++i) {
            coords(i, 0) = rng.next_double();
            coords(i, 1) = rng.next_double();
            coords(i, 2) = rng.next_double();
        }
        const geom::PointSet points = geom::PointSet::from_coords(std::move(coords));
        Tensor features = rand_tensor({8, 6}, rng, 0.0, 1.0);
        std::vector<int> labels(8);
        for (auto& l : labels) l = static_cast<int>(rng.next_below(3));

        const auto loss = [&](const Tensor&) {
            return cross_entropy(net.forward_features(points, features, true), labels);
        };
        double worst = grad_check(loss, features);
        for (auto& p : net.parameters()) {
            worst = std::max(worst, grad_check(loss, p.tensor));
        }
        record("network_loss", worst);
    }

    return results;
}

bool all_pass(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.pass; });
}

}  // namespace pointattn::selfcheck
