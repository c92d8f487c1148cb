#pragma once

#include <Eigen/Dense>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace pointattn {

using Shape = std::vector<Eigen::Index>;

Eigen::Index shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Row-major views over the flat storage; every op maps through these.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatView = Eigen::Map<RowMat>;
using ConstMatView = Eigen::Map<const RowMat>;

// One vertex of the autodiff graph. Ops allocate a fresh node per result;
// `backward` pulls this node's grad into the parents' grads. Nodes never
// own children, so the graph is a parent-linked DAG with no cycles.
struct TensorNode {
    Shape shape;
    Eigen::ArrayXd values;
    Eigen::ArrayXd grad;  // sized lazily on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backward;

    Eigen::ArrayXd& ensure_grad();
};

// Value-semantics handle to a graph node. Copies alias the node, which is
// what parameter registries and optimizers rely on. Values are written
// once by the producing op; only leaf tensors are mutated in place (by
// the optimizer, between passes).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, Eigen::ArrayXd data, bool requires_grad = false);
    static Tensor from(Shape shape, const std::vector<double>& data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    Eigen::Index extent(int axis) const { return node_->shape.at(static_cast<size_t>(axis)); }
    Eigen::Index numel() const { return node_->values.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    const Eigen::ArrayXd& values() const { return node_->values; }
    Eigen::ArrayXd& values() { return node_->values; }
    bool has_grad() const { return node_->grad.size() != 0; }
    const Eigen::ArrayXd& grad() const;

    double value() const;  // scalar tensors only
    double at(std::initializer_list<Eigen::Index> idx) const;

    ConstMatView view2d(Eigen::Index rows, Eigen::Index cols) const;

    // Reverse pass from a scalar root. Accumulates into existing grads;
    // callers zero leaf grads between passes.
    void backward() const;
    void zero_grad() const;

    std::shared_ptr<TensorNode> node() const { return node_; }
    static Tensor adopt(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }

private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;
};

// Named trainable tensor. Names are unique within a model registry.
struct Parameter {
    std::string name;
    Tensor tensor;
};

}  // namespace pointattn
