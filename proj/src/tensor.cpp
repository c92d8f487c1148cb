#include "pointattn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace pointattn {

Eigen::Index shape_numel(const Shape& s) {
    Eigen::Index n = 1;
    for (Eigen::Index e : s) n *= e;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Eigen::ArrayXd& TensorNode::ensure_grad() {
    if (grad.size() == 0) grad = Eigen::ArrayXd::Zero(values.size());
    return grad;
}

namespace {

std::shared_ptr<TensorNode> make_node(Shape shape, bool requires_grad) {
    for (Eigen::Index e : shape) {
        if (e <= 0) {
            throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape));
        }
    }
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return n;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = make_node(std::move(shape), requires_grad);
    n->values = Eigen::ArrayXd::Zero(shape_numel(n->shape));
    return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = make_node(std::move(shape), requires_grad);
    n->values = Eigen::ArrayXd::Constant(shape_numel(n->shape), value);
    return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, Eigen::ArrayXd data, bool requires_grad) {
    auto n = make_node(std::move(shape), requires_grad);
    if (data.size() != shape_numel(n->shape)) {
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not fill shape " + shape_str(n->shape));
    }
    n->values = std::move(data);
    return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, const std::vector<double>& data, bool requires_grad) {
    Eigen::ArrayXd a = Eigen::Map<const Eigen::ArrayXd>(data.data(), static_cast<Eigen::Index>(data.size()));
    return from(std::move(shape), std::move(a), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return full({1}, v, requires_grad);
}

const Eigen::ArrayXd& Tensor::grad() const {
    if (node_->grad.size() == 0) {
        throw std::logic_error("tensor has no gradient; run backward() first");
    }
    return node_->grad;
}

double Tensor::value() const {
    if (numel() != 1) {
        throw std::logic_error("value() requires a scalar tensor, shape is " + shape_str(node_->shape));
    }
    return node_->values[0];
}

double Tensor::at(std::initializer_list<Eigen::Index> idx) const {
    if (static_cast<int>(idx.size()) != rank()) {
        throw std::out_of_range("index rank mismatch");
    }
    Eigen::Index flat = 0;
    int axis = 0;
    for (Eigen::Index i : idx) {
        if (i < 0 || i >= node_->shape[static_cast<size_t>(axis)]) {
            throw std::out_of_range("tensor index out of range on axis " + std::to_string(axis));
        }
        flat = flat * node_->shape[static_cast<size_t>(axis)] + i;
        ++axis;
    }
    return node_->values[flat];
}

ConstMatView Tensor::view2d(Eigen::Index rows, Eigen::Index cols) const {
    if (rows * cols != numel()) {
        throw std::logic_error("view2d extent mismatch for " + shape_str(node_->shape));
    }
    return ConstMatView(node_->values.data(), rows, cols);
}

void Tensor::zero_grad() const {
    node_->grad.resize(0);
}

void Tensor::backward() const {
    if (!node_) throw std::logic_error("backward() on empty tensor");
    if (numel() != 1) {
        throw std::logic_error("backward() requires a scalar root, shape is " + shape_str(node_->shape));
    }
    if (!std::isfinite(node_->values[0])) {
        throw std::runtime_error("backward() on non-finite value");
    }

    // Post-order DFS over requires_grad ancestry, then reverse sweep.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            TensorNode* p = n->parents[next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward();
    }
}

}  // namespace pointattn
