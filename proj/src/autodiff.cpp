#include "chirpfuse/autodiff.hpp"

#include <algorithm>
#include <unordered_set>

#include "chirpfuse/error.hpp"

namespace chirpfuse {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

} // namespace

TensorPtr Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->value.assign(product(shape), 0.0);
    t->shape = std::move(shape);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                       bool requires_grad) {
    if (product(shape) != values.size())
        throw ShapeError("tensor values do not match shape extents");
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->value = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::scalar(double v) {
    return from({1}, {v});
}

std::size_t Tensor::numel() const {
    return product(shape);
}

std::size_t Tensor::rows() const {
    if (shape.size() != 2) throw ShapeError("rank-2 tensor expected");
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (shape.size() != 2) throw ShapeError("rank-2 tensor expected");
    return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    return value[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return value[r * shape[1] + c];
}

void Tensor::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

void Tape::record(std::vector<TensorPtr> inputs, TensorPtr output, BackwardFn fn) {
    nodes_.push_back({std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(const TensorPtr& loss) {
    if (!loss || loss->numel() != 1)
        throw ShapeError("backward expects a scalar loss");

    std::unordered_set<Tensor*> seen;
    auto touch = [&seen](const TensorPtr& t) {
        if (!t || !seen.insert(t.get()).second) return;
        t->adjoint.assign(t->value.size(), 0.0);
    };
    touch(loss);
    for (auto& node : nodes_) {
        touch(node.output);
        for (auto& in : node.inputs) touch(in);
    }

    loss->adjoint[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if (it->fn) it->fn();

    for (Tensor* t : seen) {
        if (!t->requires_grad) continue;
        t->ensure_grad();
        for (std::size_t i = 0; i < t->grad.size(); ++i) t->grad[i] += t->adjoint[i];
    }
}

void Tape::clear() {
    nodes_.clear();
}

} // namespace chirpfuse
