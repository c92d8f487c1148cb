#pragma once

#include <functional>

#include "pointattn/tensor.hpp"

namespace pointattn {

// Central-difference check of reverse-mode gradients.
//
// `f` must be a pure scalar-valued function of the graph containing `x`;
// it is re-evaluated 2*numel(x) times with x's entries perturbed in
// place. Returns the max relative error with denominator
// max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

}  // namespace pointattn
