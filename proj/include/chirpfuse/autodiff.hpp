#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace chirpfuse {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major tensor. Extents may be zero (an empty operand is legal in
// concat); numel is the product of extents. grad persists across backward
// sweeps and accumulates; adjoint is per-sweep scratch owned by the tape.
class Tensor {
public:
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> adjoint;
    bool requires_grad = false;
    std::string name;

    static TensorPtr zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static TensorPtr from(std::vector<std::size_t> shape, std::vector<double> values,
                          bool requires_grad = false);
    static TensorPtr scalar(double v);

    std::size_t numel() const;

    // Rank-2 accessors; throw on other ranks.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    void ensure_grad();
    void zero_grad();
};

// Wengert list. Ops append one node per recorded output; backward replays
// the list in reverse, moving adjoints from outputs to inputs, then folds
// each requires_grad tensor's adjoint into its grad (so two sweeps over the
// same graph double the gradient).
class Tape {
public:
    using BackwardFn = std::function<void()>;

    void record(std::vector<TensorPtr> inputs, TensorPtr output, BackwardFn fn);
    void backward(const TensorPtr& loss);
    void clear();
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        std::vector<TensorPtr> inputs;
        TensorPtr output;
        BackwardFn fn;
    };
    std::vector<Node> nodes_;
};

} // namespace chirpfuse
