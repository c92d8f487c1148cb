#include "pointattn/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace pointattn {

namespace {

std::shared_ptr<TensorNode> result_node(Shape shape, std::vector<std::shared_ptr<TensorNode>> parents) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    return n;
}

MatView grad_view(TensorNode& n, Eigen::Index rows, Eigen::Index cols) {
    return MatView(n.ensure_grad().data(), rows, cols);
}

ConstMatView value_view(const TensorNode& n, Eigen::Index rows, Eigen::Index cols) {
    return ConstMatView(n.values.data(), rows, cols);
}

Eigen::Index leading_extent(const Shape& s) {
    Eigen::Index r = 1;
    for (size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
    return r;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shapes disagree, " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
}

}  // namespace

BatchNormState::BatchNormState(Eigen::Index channels)
    : gamma(Tensor::full({channels}, 1.0, true)),
      beta(Tensor::zeros({channels}, true)),
      running_mean(Eigen::ArrayXd::Zero(channels)),
      running_var(Eigen::ArrayXd::Ones(channels)) {}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    }
    const Eigen::Index m = a.extent(0), k = a.extent(1), n = b.extent(1);
    auto out = result_node({m, n}, {a.node(), b.node()});
    out->values.resize(m * n);
    MatView(out->values.data(), m, n) = a.view2d(m, k) * b.view2d(k, n);
    if (out->requires_grad) {
        out->backward = [o = out.get(), pa = a.node(), pb = b.node(), m, k, n]() {
            ConstMatView dout(o->grad.data(), m, n);
            if (pa->requires_grad) grad_view(*pa, m, k) += dout * value_view(*pb, k, n).transpose();
            if (pb->requires_grad) grad_view(*pb, k, n) += value_view(*pa, m, k).transpose() * dout;
        };
    }
    return Tensor::adopt(out);
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) {
        throw std::invalid_argument("transpose: rank-2 tensor required, got " + shape_str(a.shape()));
    }
    const Eigen::Index r = a.extent(0), c = a.extent(1);
    auto out = result_node({c, r}, {a.node()});
    out->values.resize(r * c);
    MatView(out->values.data(), c, r) = a.view2d(r, c).transpose();
    if (out->requires_grad) {
        out->backward = [o = out.get(), p = a.node(), r, c]() {
            grad_view(*p, r, c) += ConstMatView(o->grad.data(), c, r).transpose();
        };
    }
    return Tensor::adopt(out);
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                    shape_str(shape));
    }
    auto out = result_node(std::move(shape), {a.node()});
    out->values = a.values();  // row-major order is preserved
    if (out->requires_grad) {
        out->backward = [o = out.get(), p = a.node()]() { p->ensure_grad() += o->grad; };
    }
    return Tensor::adopt(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto out = result_node(a.shape(), {a.node(), b.node()});
    out->values = a.values() + b.values();
    if (out->requires_grad) {
        out->backward = [o = out.get(), pa = a.node(), pb = b.node()]() {
            if (pa->requires_grad) pa->ensure_grad() += o->grad;
            if (pb->requires_grad) pb->ensure_grad() += o->grad;
        };
    }
    return Tensor::adopt(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto out = result_node(a.shape(), {a.node(), b.node()});
    out->values = a.values() * b.values();
    if (out->requires_grad) {
        out->backward = [o = out.get(), pa = a.node(), pb = b.node()]() {
            if (pa->requires_grad) pa->ensure_grad() += o->grad * pb->values;
            if (pb->requires_grad) pb->ensure_grad() += o->grad * pa->values;
        };
    }
    return Tensor::adopt(out);
}

Tensor scale(const Tensor& x, const Tensor& factor) {
    if (factor.numel() != 1) {
        throw std::invalid_argument("scale: factor must be scalar, got " + shape_str(factor.shape()));
    }
    auto out = result_node(x.shape(), {x.node(), factor.node()});
    out->values = x.values() * factor.value();
    if (out->requires_grad) {
        out->backward = [o = out.get(), px = x.node(), pf = factor.node()]() {
            if (px->requires_grad) px->ensure_grad() += o->grad * pf->values[0];
            if (pf->requires_grad) pf->ensure_grad()[0] += (o->grad * px->values).sum();
        };
    }
    return Tensor::adopt(out);
}

Tensor relu(const Tensor& x) {
    auto out = result_node(x.shape(), {x.node()});
    out->values = x.values().max(0.0);
    if (out->requires_grad) {
        out->backward = [o = out.get(), p = x.node()]() {
            // subgradient 0 at exactly 0
            p->ensure_grad() += o->grad * (p->values > 0.0).cast<double>();
        };
    }
    return Tensor::adopt(out);
}

Tensor sum(const Tensor& x) {
    auto out = result_node({1}, {x.node()});
    out->values = Eigen::ArrayXd::Constant(1, x.values().sum());
    if (out->requires_grad) {
        out->backward = [o = out.get(), p = x.node()]() { p->ensure_grad() += o->grad[0]; };
    }
    return Tensor::adopt(out);
}

Tensor max_reduce(const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.rank()) {
        throw std::invalid_argument("max_reduce: axis " + std::to_string(axis) + " invalid for " +
                                    shape_str(x.shape()));
    }
    const Shape& s = x.shape();
    Eigen::Index outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
    for (int i = axis + 1; i < x.rank(); ++i) inner *= s[static_cast<size_t>(i)];
    const Eigen::Index len = s[static_cast<size_t>(axis)];

    Shape out_shape;
    for (int i = 0; i < x.rank(); ++i) {
        if (i != axis) out_shape.push_back(s[static_cast<size_t>(i)]);
    }
    if (out_shape.empty()) out_shape.push_back(1);

    auto out = result_node(std::move(out_shape), {x.node()});
    out->values.resize(outer * inner);
    std::vector<Eigen::Index> argmax(static_cast<size_t>(outer * inner));
    const auto& v = x.values();
    for (Eigen::Index o = 0; o < outer; ++o) {
        for (Eigen::Index i = 0; i < inner; ++i) {
            Eigen::Index best = (o * len) * inner + i;
            double best_v = v[best];
            for (Eigen::Index j = 1; j < len; ++j) {
                const Eigen::Index flat = (o * len + j) * inner + i;
                if (v[flat] > best_v) {  // first index wins ties
                    best_v = v[flat];
                    best = flat;
                }
            }
            out->values[o * inner + i] = best_v;
            argmax[static_cast<size_t>(o * inner + i)] = best;
        }
    }
    if (out->requires_grad) {
        out->backward = [o = out.get(), p = x.node(), argmax = std::move(argmax)]() {
            auto& g = p->ensure_grad();
            for (Eigen::Index i = 0; i < o->grad.size(); ++i) {
                g[argmax[static_cast<size_t>(i)]] += o->grad[i];
            }
        };
    }
    return Tensor::adopt(out);
}

Tensor softmax(const Tensor& x, SoftmaxMode mode) {
    if (x.numel() == 0) throw std::invalid_argument("softmax: empty input");
    Eigen::Index rows, cols;
    if (mode == SoftmaxMode::kRow) {
        if (x.rank() != 2) {
            throw std::invalid_argument("softmax: row mode requires rank 2, got " + shape_str(x.shape()));
        }
        rows = x.extent(0);
        cols = x.extent(1);
    } else {
        rows = 1;
        cols = x.numel();
    }

    auto out = result_node(x.shape(), {x.node()});
    out->values.resize(x.numel());
    ConstMatView xin(x.values().data(), rows, cols);
    MatView y(out->values.data(), rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double m = xin.row(r).maxCoeff();
        y.row(r) = (xin.row(r).array() - m).exp();
        y.row(r) /= y.row(r).sum();
    }
    if (out->requires_grad) {
        out->backward = [o = out.get(), p = x.node(), rows, cols]() {
            ConstMatView y(o->values.data(), rows, cols);
            ConstMatView dy(o->grad.data(), rows, cols);
            MatView dx(p->ensure_grad().data(), rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const double dot = (dy.row(r).array() * y.row(r).array()).sum();
                dx.row(r).array() += y.row(r).array() * (dy.row(r).array() - dot);
            }
        };
    }
    return Tensor::adopt(out);
}

Tensor pointwise_affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() < 2 || w.rank() != 2 || b.rank() != 1) {
        throw std::invalid_argument("pointwise_affine: need x rank>=2, w rank 2, b rank 1");
    }
    const Eigen::Index cin = x.extent(x.rank() - 1);
    if (w.extent(0) != cin || b.extent(0) != w.extent(1)) {
        throw std::invalid_argument("pointwise_affine: channel mismatch, x " + shape_str(x.shape()) +
                                    ", w " + shape_str(w.shape()) + ", b " + shape_str(b.shape()));
    }
    const Eigen::Index rows = leading_extent(x.shape());
    const Eigen::Index cout = w.extent(1);
    Shape out_shape = x.shape();
    out_shape.back() = cout;

    auto out = result_node(std::move(out_shape), {x.node(), w.node(), b.node()});
    out->values.resize(rows * cout);
    ConstMatView bm(b.values().data(), 1, cout);
    MatView(out->values.data(), rows, cout) =
        (x.view2d(rows, cin) * w.view2d(cin, cout)).rowwise() + bm.row(0);
    if (out->requires_grad) {
        out->backward = [o = out.get(), px = x.node(), pw = w.node(), pb = b.node(), rows, cin, cout]() {
            ConstMatView dout(o->grad.data(), rows, cout);
            if (px->requires_grad) {
                grad_view(*px, rows, cin) += dout * value_view(*pw, cin, cout).transpose();
            }
            if (pw->requires_grad) {
                grad_view(*pw, cin, cout) += value_view(*px, rows, cin).transpose() * dout;
            }
            if (pb->requires_grad) {
                grad_view(*pb, 1, cout) += dout.colwise().sum();
            }
        };
    }
    return Tensor::adopt(out);
}

Tensor batch_norm(const Tensor& x, BatchNormState& state, bool training) {
    if (x.rank() < 2) {
        throw std::invalid_argument("batch_norm: rank >= 2 required, got " + shape_str(x.shape()));
    }
    const Eigen::Index c = x.extent(x.rank() - 1);
    if (c != state.channels()) {
        throw std::invalid_argument("batch_norm: " + std::to_string(c) + " channels vs state width " +
                                    std::to_string(state.channels()));
    }
    const Eigen::Index rows = leading_extent(x.shape());
    if (rows == 0) throw std::invalid_argument("batch_norm: empty batch");

    ConstMatView xin(x.values().data(), rows, c);
    Eigen::ArrayXd mean(c), var(c);
    if (training) {
        mean = xin.colwise().mean().array();
        for (Eigen::Index j = 0; j < c; ++j) {
            var[j] = (xin.col(j).array() - mean[j]).square().sum() / static_cast<double>(rows);
        }
        state.running_mean = (1.0 - state.momentum) * state.running_mean + state.momentum * mean;
        state.running_var = (1.0 - state.momentum) * state.running_var + state.momentum * var;
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }
    Eigen::ArrayXd inv_std = (var + state.eps).sqrt().inverse();

    auto out = result_node(x.shape(), {x.node(), state.gamma.node(), state.beta.node()});
    out->values.resize(rows * c);
    RowMat xhat(rows, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        xhat.col(j) = (xin.col(j).array() - mean[j]) * inv_std[j];
    }
    MatView y(out->values.data(), rows, c);
    const auto& gv = state.gamma.values();
    const auto& bv = state.beta.values();
    for (Eigen::Index j = 0; j < c; ++j) {
        y.col(j) = xhat.col(j).array() * gv[j] + bv[j];
    }
    if (out->requires_grad) {
        out->backward = [o = out.get(), px = x.node(), pg = state.gamma.node(), pbeta = state.beta.node(),
                         xhat = std::move(xhat), inv_std = std::move(inv_std), rows, c, training]() {
            ConstMatView dy(o->grad.data(), rows, c);
            if (pg->requires_grad) {
                auto& g = pg->ensure_grad();
                for (Eigen::Index j = 0; j < c; ++j) {
                    g[j] += (dy.col(j).array() * xhat.col(j).array()).sum();
                }
            }
            if (pbeta->requires_grad) {
                auto& g = pbeta->ensure_grad();
                for (Eigen::Index j = 0; j < c; ++j) g[j] += dy.col(j).sum();
            }
            if (px->requires_grad) {
                MatView dx(px->ensure_grad().data(), rows, c);
                const auto& gv = pg->values;
                const double n = static_cast<double>(rows);
                for (Eigen::Index j = 0; j < c; ++j) {
                    if (training) {
                        const double mean_dy = dy.col(j).sum() / n;
                        const double mean_dy_xhat = (dy.col(j).array() * xhat.col(j).array()).sum() / n;
                        dx.col(j).array() += gv[j] * inv_std[j] *
                                             (dy.col(j).array() - mean_dy - xhat.col(j).array() * mean_dy_xhat);
                    } else {
                        dx.col(j).array() += gv[j] * inv_std[j] * dy.col(j).array();
                    }
                }
            }
        };
    }
    return Tensor::adopt(out);
}

Tensor cross_entropy(const Tensor& scores, const std::vector<int>& labels) {
    if (scores.rank() != 2) {
        throw std::invalid_argument("cross_entropy: scores must be N x C, got " + shape_str(scores.shape()));
    }
    const Eigen::Index n = scores.extent(0), c = scores.extent(1);
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(n) + " rows");
    }
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= c) {
            throw std::out_of_range("cross_entropy: label " + std::to_string(labels[i]) + " at row " +
                                    std::to_string(i) + " outside [0," + std::to_string(c) + ")");
        }
    }

    ConstMatView s(scores.values().data(), n, c);
    RowMat probs(n, c);
    double loss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const double m = s.row(r).maxCoeff();
        probs.row(r) = (s.row(r).array() - m).exp();
        const double z = probs.row(r).sum();
        probs.row(r) /= z;
        loss -= s(r, labels[static_cast<size_t>(r)]) - m - std::log(z);
    }
    loss /= static_cast<double>(n);

    auto out = result_node({1}, {scores.node()});
    out->values = Eigen::ArrayXd::Constant(1, loss);
    if (out->requires_grad) {
        out->backward = [o = out.get(), p = scores.node(), probs = std::move(probs), labels, n, c]() {
            const double g = o->grad[0] / static_cast<double>(n);
            MatView dx(p->ensure_grad().data(), n, c);
            dx += probs * g;
            for (Eigen::Index r = 0; r < n; ++r) {
                dx(r, labels[static_cast<size_t>(r)]) -= g;
            }
        };
    }
    return Tensor::adopt(out);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 1) {
        throw std::invalid_argument("concat_channels: rank mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
    for (int i = 0; i + 1 < a.rank(); ++i) {
        if (a.extent(i) != b.extent(i)) {
            throw std::invalid_argument("concat_channels: leading extents disagree, " +
                                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
        }
    }
    const Eigen::Index rows = leading_extent(a.shape());
    const Eigen::Index ca = a.extent(a.rank() - 1), cb = b.extent(b.rank() - 1);
    Shape out_shape = a.shape();
    out_shape.back() = ca + cb;

    auto out = result_node(std::move(out_shape), {a.node(), b.node()});
    out->values.resize(rows * (ca + cb));
    MatView y(out->values.data(), rows, ca + cb);
    y.leftCols(ca) = a.view2d(rows, ca);
    y.rightCols(cb) = b.view2d(rows, cb);
    if (out->requires_grad) {
        out->backward = [o = out.get(), pa = a.node(), pb = b.node(), rows, ca, cb]() {
            ConstMatView dy(o->grad.data(), rows, ca + cb);
            if (pa->requires_grad) grad_view(*pa, rows, ca) += dy.leftCols(ca);
            if (pb->requires_grad) grad_view(*pb, rows, cb) += dy.rightCols(cb);
        };
    }
    return Tensor::adopt(out);
}

Tensor gather_rows(const Tensor& src, const std::vector<Eigen::Index>& index, Shape prefix) {
    if (src.rank() != 2) {
        throw std::invalid_argument("gather_rows: source must be rank 2, got " + shape_str(src.shape()));
    }
    const Eigen::Index n = src.extent(0), c = src.extent(1);
    const Eigen::Index rows = shape_numel(prefix);
    if (rows != static_cast<Eigen::Index>(index.size())) {
        throw std::invalid_argument("gather_rows: index count does not fill " + shape_str(prefix));
    }
    for (Eigen::Index i : index) {
        if (i < 0 || i >= n) {
            throw std::out_of_range("gather_rows: row index " + std::to_string(i) + " outside [0," +
                                    std::to_string(n) + ")");
        }
    }
    Shape out_shape = std::move(prefix);
    out_shape.push_back(c);

    auto out = result_node(std::move(out_shape), {src.node()});
    out->values.resize(rows * c);
    MatView y(out->values.data(), rows, c);
    ConstMatView s(src.values().data(), n, c);
    for (Eigen::Index r = 0; r < rows; ++r) {
        y.row(r) = s.row(index[static_cast<size_t>(r)]);
    }
    if (out->requires_grad) {
        out->backward = [o = out.get(), p = src.node(), index, rows, n, c]() {
            MatView dsrc(p->ensure_grad().data(), n, c);
            ConstMatView dy(o->grad.data(), rows, c);
            for (Eigen::Index r = 0; r < rows; ++r) {
                dsrc.row(index[static_cast<size_t>(r)]) += dy.row(r);
            }
        };
    }
    return Tensor::adopt(out);
}

Tensor apply_interpolation(const Tensor& src, const InterpPlan& plan) {
    if (src.rank() != 2) {
        throw std::invalid_argument("apply_interpolation: source must be rank 2");
    }
    const Eigen::Index n = src.extent(0), c = src.extent(1);
    const Eigen::Index q = plan.indices.rows(), k = plan.indices.cols();
    if (plan.weights.rows() != q || plan.weights.cols() != k) {
        throw std::invalid_argument("apply_interpolation: plan index/weight extents disagree");
    }
    for (Eigen::Index r = 0; r < q; ++r) {
        for (Eigen::Index j = 0; j < k; ++j) {
            if (plan.indices(r, j) < 0 || plan.indices(r, j) >= n) {
                throw std::out_of_range("apply_interpolation: source index out of range");
            }
        }
    }

    auto out = result_node({q, c}, {src.node()});
    out->values.resize(q * c);
    MatView y(out->values.data(), q, c);
    ConstMatView s(src.values().data(), n, c);
    y.setZero();
    for (Eigen::Index r = 0; r < q; ++r) {
        for (Eigen::Index j = 0; j < k; ++j) {
            y.row(r) += plan.weights(r, j) * s.row(plan.indices(r, j));
        }
    }
    if (out->requires_grad) {
        out->backward = [o = out.get(), p = src.node(), idx = plan.indices, w = plan.weights, q, k, n, c]() {
            MatView dsrc(p->ensure_grad().data(), n, c);
            ConstMatView dy(o->grad.data(), q, c);
            for (Eigen::Index r = 0; r < q; ++r) {
                for (Eigen::Index j = 0; j < k; ++j) {
                    dsrc.row(idx(r, j)) += w(r, j) * dy.row(r);
                }
            }
        };
    }
    return Tensor::adopt(out);
}

std::vector<int> argmax_rows(const Tensor& scores) {
    if (scores.rank() != 2) {
        throw std::invalid_argument("argmax_rows: rank-2 tensor required");
    }
    const Eigen::Index n = scores.extent(0), c = scores.extent(1);
    ConstMatView s(scores.values().data(), n, c);
    std::vector<int> out(static_cast<size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::Index best = 0;
        s.row(r).maxCoeff(&best);
        out[static_cast<size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

}  // namespace pointattn
