#pragma once

#include <vector>

#include "pointattn/tensor.hpp"

namespace pointattn {

enum class SoftmaxMode { kRow, kGlobal };

// Learned scale/shift plus running statistics for one normalized width.
// gamma/beta participate in autodiff; the running stats are plain buffers
// updated in training mode and consumed in inference mode.
struct BatchNormState {
    Tensor gamma;
    Tensor beta;
    Eigen::ArrayXd running_mean;
    Eigen::ArrayXd running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    explicit BatchNormState(Eigen::Index channels);
    Eigen::Index channels() const { return running_mean.size(); }
};

// Interpolation stencil: for each output row, k source rows and convex
// weights. Produced by geometry, consumed by apply_interpolation.
struct InterpPlan {
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> indices;  // Q x k
    Eigen::MatrixXd weights;                                              // Q x k
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// x * factor with a scalar tensor factor (learnable or constant).
Tensor scale(const Tensor& x, const Tensor& factor);
Tensor relu(const Tensor& x);
Tensor sum(const Tensor& x);

// Maxima along `axis`; gradient is routed to the first argmax on ties.
Tensor max_reduce(const Tensor& x, int axis);

Tensor softmax(const Tensor& x, SoftmaxMode mode);

// out[..., :] = x[..., :] * w + b over the trailing channel axis.
Tensor pointwise_affine(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor batch_norm(const Tensor& x, BatchNormState& state, bool training);

// Mean of -log softmax(scores)[label] over rows.
Tensor cross_entropy(const Tensor& scores, const std::vector<int>& labels);

// Concatenate along the trailing axis; leading extents must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// out[p, :] = src[index[p], :], with out shape prefix + {C}. Backward
// scatter-adds, so repeated indices accumulate.
Tensor gather_rows(const Tensor& src, const std::vector<Eigen::Index>& index, Shape prefix);

// out[q, :] = sum_j plan.weights(q, j) * src[plan.indices(q, j), :].
Tensor apply_interpolation(const Tensor& src, const InterpPlan& plan);

std::vector<int> argmax_rows(const Tensor& scores);

}  // namespace pointattn
