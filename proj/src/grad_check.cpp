#include "pointattn/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace pointattn {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
    if (!x.requires_grad()) {
        throw std::invalid_argument("grad_check: x must require gradients");
    }

    x.zero_grad();
    Tensor y = f(x);
    if (y.numel() != 1) {
        throw std::invalid_argument("grad_check: f must be scalar-valued, got " + shape_str(y.shape()));
    }
    if (!std::isfinite(y.value())) {
        throw std::runtime_error("grad_check: f(x) is not finite");
    }
    y.backward();
    const Eigen::ArrayXd analytic = x.grad();

    auto& vals = x.node()->values;
    double max_rel = 0.0;
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        vals[i] = orig + h;
        const double fp = f(x).value();
        vals[i] = orig - h;
        const double fm = f(x).value();
        vals[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error("grad_check: perturbed f(x) is not finite");
        }
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
        max_rel = std::max(max_rel, std::abs(numeric - analytic[i]) / denom);
    }
    return max_rel;
}

}  // namespace pointattn
