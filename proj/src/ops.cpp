#include "chirpfuse/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "chirpfuse/error.hpp"
#include "chirpfuse/kernels.hpp"
#include "chirpfuse/rng.hpp"

namespace chirpfuse::ops {

namespace {

void require_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
    if (a->shape != b->shape)
        throw ShapeError(std::string(op) + ": shapes differ");
}

bool wants_grad(Tape* tape, std::initializer_list<TensorPtr> ins) {
    if (!tape) return false;
    for (const auto& t : ins)
        if (t->requires_grad) return true;
    return false;
}

} // namespace

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "add");
    auto out = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = a->value[i] + b->value[i];
    if (wants_grad(tape, {a, b})) {
        out->requires_grad = true;
        tape->record({a, b}, out, [a, b, out] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < a->adjoint.size(); ++i)
                    a->adjoint[i] += out->adjoint[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < b->adjoint.size(); ++i)
                    b->adjoint[i] += out->adjoint[i];
        });
    }
    return out;
}

TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "mul");
    auto out = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = a->value[i] * b->value[i];
    if (wants_grad(tape, {a, b})) {
        out->requires_grad = true;
        tape->record({a, b}, out, [a, b, out] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < a->adjoint.size(); ++i)
                    a->adjoint[i] += out->adjoint[i] * b->value[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < b->adjoint.size(); ++i)
                    b->adjoint[i] += out->adjoint[i] * a->value[i];
        });
    }
    return out;
}

TensorPtr add_bias(Tape* tape, const TensorPtr& x, const TensorPtr& b) {
    std::size_t m = x->rows(), n = x->cols();
    if (b->shape.size() != 2 || b->shape[0] != 1 || b->shape[1] != n)
        throw ShapeError("add_bias: bias must be [1 x cols]");
    auto out = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out->value[i * n + j] = x->value[i * n + j] + b->value[j];
    if (wants_grad(tape, {x, b})) {
        out->requires_grad = true;
        tape->record({x, b}, out, [x, b, out, m, n] {
            if (x->requires_grad)
                for (std::size_t i = 0; i < m * n; ++i)
                    x->adjoint[i] += out->adjoint[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        b->adjoint[j] += out->adjoint[i * n + j];
        });
    }
    return out;
}

TensorPtr scale(Tape* tape, const TensorPtr& x, double c) {
    auto out = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = c * x->value[i];
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out, c] {
            for (std::size_t i = 0; i < x->adjoint.size(); ++i)
                x->adjoint[i] += c * out->adjoint[i];
        });
    }
    return out;
}

TensorPtr relu(Tape* tape, const TensorPtr& x) {
    auto out = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = x->value[i] > 0.0 ? x->value[i] : 0.0;
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out] {
            for (std::size_t i = 0; i < x->adjoint.size(); ++i)
                if (x->value[i] > 0.0) x->adjoint[i] += out->adjoint[i];
        });
    }
    return out;
}

TensorPtr sigmoid(Tape* tape, const TensorPtr& x) {
    auto out = Tensor::zeros(x->shape);
    const double hi = std::nextafter(1.0, 0.0);
    const double lo = std::numeric_limits<double>::min();
    for (std::size_t i = 0; i < out->value.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-x->value[i]));
        out->value[i] = std::clamp(s, lo, hi);
    }
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out] {
            for (std::size_t i = 0; i < x->adjoint.size(); ++i) {
                double s = out->value[i];
                x->adjoint[i] += out->adjoint[i] * s * (1.0 - s);
            }
        });
    }
    return out;
}

TensorPtr exp(Tape* tape, const TensorPtr& x) {
    auto out = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = std::exp(x->value[i]);
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out] {
            for (std::size_t i = 0; i < x->adjoint.size(); ++i)
                x->adjoint[i] += out->adjoint[i] * out->value[i];
        });
    }
    return out;
}

TensorPtr log_floored(Tape* tape, const TensorPtr& x) {
    auto out = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = std::log(std::max(x->value[i], kLogFloor));
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out] {
            for (std::size_t i = 0; i < x->adjoint.size(); ++i)
                if (x->value[i] > kLogFloor)
                    x->adjoint[i] += out->adjoint[i] / x->value[i];
        });
    }
    return out;
}

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    std::size_t m = a->rows(), k = a->cols(), n = b->cols();
    if (b->rows() != k) {
        auto fmt = [](const TensorPtr& t) {
            std::string s = "[";
            for (std::size_t i = 0; i < t->shape.size(); ++i)
                s += (i ? " x " : "") + std::to_string(t->shape[i]);
            return s + "]";
        };
        throw ShapeError("matmul: inner extents differ, " + fmt(a) + " vs " + fmt(b));
    }
    auto out = Tensor::zeros({m, n});
    kernels::matmul(m, k, n, a->value.data(), b->value.data(), out->value.data());
    if (wants_grad(tape, {a, b})) {
        out->requires_grad = true;
        tape->record({a, b}, out, [a, b, out, m, k, n] {
            if (a->requires_grad)
                kernels::matmul_nt(m, n, k, out->adjoint.data(), b->value.data(),
                                   a->adjoint.data(), true);
            if (b->requires_grad)
                kernels::matmul_tn(m, k, n, a->value.data(), out->adjoint.data(),
                                   b->adjoint.data(), true);
        });
    }
    return out;
}

TensorPtr concat(Tape* tape, std::size_t axis, const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    std::size_t rank = parts[0]->shape.size();
    if (rank < 1 || rank > 2 || axis >= rank)
        throw ShapeError("concat: rank must be 1 or 2 and axis within rank");
    std::size_t other = 1 - axis;
    for (const auto& p : parts) {
        if (p->shape.size() != rank) throw ShapeError("concat: ranks differ");
        if (rank == 2 && p->shape[other] != parts[0]->shape[other])
            throw ShapeError("concat: off-axis extents differ");
    }

    std::vector<std::size_t> shape = parts[0]->shape;
    shape[axis] = 0;
    for (const auto& p : parts) shape[axis] += p->shape[axis];
    auto out = Tensor::zeros(shape);

    // Row-major copy; for axis 1 each input contributes a column block.
    std::size_t n_rows = rank == 2 ? shape[0] : 1;
    std::size_t out_cols = rank == 2 ? shape[1] : shape[0];
    if (rank == 2 && axis == 0) {
        n_rows = 1;
        out_cols = shape[0] * shape[1];
    }
    std::size_t col_off = 0;
    for (const auto& p : parts) {
        std::size_t p_cols = p->numel() / (n_rows == 0 ? 1 : n_rows);
        for (std::size_t r = 0; r < n_rows; ++r)
            std::copy(p->value.begin() + r * p_cols, p->value.begin() + (r + 1) * p_cols,
                      out->value.begin() + r * out_cols + col_off);
        col_off += p_cols;
    }

    bool rg = false;
    if (tape)
        for (const auto& p : parts)
            if (p->requires_grad) rg = true;
    if (rg) {
        out->requires_grad = true;
        tape->record(parts, out, [parts, out, n_rows, out_cols] {
            std::size_t col_off = 0;
            for (const auto& p : parts) {
                std::size_t p_cols = p->numel() / (n_rows == 0 ? 1 : n_rows);
                if (p->requires_grad)
                    for (std::size_t r = 0; r < n_rows; ++r)
                        for (std::size_t c = 0; c < p_cols; ++c)
                            p->adjoint[r * p_cols + c] +=
                                out->adjoint[r * out_cols + col_off + c];
                col_off += p_cols;
            }
        });
    }
    return out;
}

TensorPtr reshape(Tape* tape, const TensorPtr& x, std::vector<std::size_t> shape) {
    auto out = Tensor::from(std::move(shape), x->value);
    if (out->numel() != x->numel()) throw ShapeError("reshape: numel changed");
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out] {
            for (std::size_t i = 0; i < x->adjoint.size(); ++i)
                x->adjoint[i] += out->adjoint[i];
        });
    }
    return out;
}

TensorPtr softmax(Tape* tape, const TensorPtr& x, std::size_t axis) {
    if (x->shape.size() == 1) {
        if (axis != 0) throw ShapeError("softmax: axis out of range");
        auto row = reshape(tape, x, {1, x->shape[0]});
        return reshape(tape, softmax_rows(tape, row), x->shape);
    }
    if (x->shape.size() != 2 || axis > 1)
        throw ShapeError("softmax: rank-1 or rank-2 input with a valid axis expected");
    if (axis == 1) return softmax_rows(tape, x);
    // Column softmax via transpose; shapes here are small (category axes).
    std::size_t m = x->shape[0], n = x->shape[1];
    std::vector<double> tv(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) tv[j * m + i] = x->value[i * n + j];
    auto xt = Tensor::from({n, m}, std::move(tv));
    if (wants_grad(tape, {x})) {
        xt->requires_grad = true;
        tape->record({x}, xt, [x, xt, m, n] {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    x->adjoint[i * n + j] += xt->adjoint[j * m + i];
        });
    }
    auto st = softmax_rows(tape, xt);
    std::vector<double> ov(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ov[i * n + j] = st->value[j * m + i];
    auto out = Tensor::from({m, n}, std::move(ov));
    if (wants_grad(tape, {st})) {
        out->requires_grad = true;
        tape->record({st}, out, [st, out, m, n] {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    st->adjoint[j * m + i] += out->adjoint[i * n + j];
        });
    }
    return out;
}

TensorPtr gumbel_softmax(Tape* tape, const TensorPtr& logits, double tau, Rng* rng) {
    if (tau <= 0.0) throw ConfigError("gumbel_softmax: tau must be positive");
    auto noisy = logits;
    if (rng) {
        auto g = Tensor::zeros(logits->shape);
        for (double& v : g->value) v = rng->next_gumbel();
        noisy = add(tape, logits, g);
    }
    auto scaled = scale(tape, noisy, 1.0 / tau);
    return softmax(tape, scaled, scaled->shape.size() - 1);
}

TensorPtr softmax_rows(Tape* tape, const TensorPtr& x) {
    std::size_t m = x->rows(), n = x->cols();
    if (n == 0) throw ShapeError("softmax_rows: empty rows");
    auto out = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x->value.data() + i * n;
        double mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double e = std::exp(row[j] - mx);
            out->value[i * n + j] = e;
            z += e;
        }
        for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] /= z;
    }
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out, m, n] {
            for (std::size_t i = 0; i < m; ++i) {
                const double* y = out->value.data() + i * n;
                const double* dy = out->adjoint.data() + i * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
                for (std::size_t j = 0; j < n; ++j)
                    x->adjoint[i * n + j] += y[j] * (dy[j] - dot);
            }
        });
    }
    return out;
}

TensorPtr mean_hw(Tape* tape, const TensorPtr& x) {
    if (x->shape.size() != 3) throw ShapeError("mean_hw: rank-3 input expected");
    std::size_t c = x->shape[0], hw = x->shape[1] * x->shape[2];
    if (hw == 0) throw ShapeError("mean_hw: empty plane");
    auto out = Tensor::zeros({1, c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += x->value[ch * hw + i];
        out->value[ch] = s / static_cast<double>(hw);
    }
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out, c, hw] {
            double inv = 1.0 / static_cast<double>(hw);
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < hw; ++i)
                    x->adjoint[ch * hw + i] += out->adjoint[ch] * inv;
        });
    }
    return out;
}

TensorPtr conv2d3x3(Tape* tape, const TensorPtr& x, const TensorPtr& w,
                    const TensorPtr& b) {
    if (x->shape.size() != 3) throw ShapeError("conv2d3x3: rank-3 input expected");
    std::size_t cin = x->shape[0], h = x->shape[1], wd = x->shape[2];
    if (w->shape.size() != 4 || w->shape[1] != cin || w->shape[2] != 3 || w->shape[3] != 3)
        throw ShapeError("conv2d3x3: weight must be [cout x cin x 3 x 3]");
    std::size_t cout = w->shape[0];
    if (b->shape != std::vector<std::size_t>{cout})
        throw ShapeError("conv2d3x3: bias must be [cout]");

    auto out = Tensor::zeros({cout, h, wd});
    kernels::conv2d3x3_forward(cin, h, wd, cout, x->value.data(), w->value.data(),
                               b->value.data(), out->value.data());
    if (wants_grad(tape, {x, w, b})) {
        out->requires_grad = true;
        tape->record({x, w, b}, out, [x, w, b, out, cin, h, wd, cout] {
            if (x->requires_grad)
                kernels::conv2d3x3_grad_input(cin, h, wd, cout, w->value.data(),
                                              out->adjoint.data(), x->adjoint.data());
            if (w->requires_grad || b->requires_grad)
                kernels::conv2d3x3_grad_params(cin, h, wd, cout, x->value.data(),
                                               out->adjoint.data(), w->adjoint.data(),
                                               b->adjoint.data());
        });
    }
    return out;
}

TensorPtr mean_pool2(Tape* tape, const TensorPtr& x) {
    if (x->shape.size() != 3) throw ShapeError("mean_pool2: rank-3 input expected");
    std::size_t c = x->shape[0], h = x->shape[1], w = x->shape[2];
    if (h % 2 != 0 || w % 2 != 0)
        throw ShapeError("mean_pool2: spatial extents must be even");
    auto out = Tensor::zeros({c, h / 2, w / 2});
    kernels::mean_pool2_forward(c, h, w, x->value.data(), out->value.data());
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out, c, h, w] {
            kernels::mean_pool2_grad(c, h, w, out->adjoint.data(), x->adjoint.data());
        });
    }
    return out;
}

TensorPtr sum_all(Tape* tape, const TensorPtr& x) {
    double s = 0.0;
    for (double v : x->value) s += v;
    auto out = Tensor::scalar(s);
    if (wants_grad(tape, {x})) {
        out->requires_grad = true;
        tape->record({x}, out, [x, out] {
            for (std::size_t i = 0; i < x->adjoint.size(); ++i)
                x->adjoint[i] += out->adjoint[0];
        });
    }
    return out;
}

TensorPtr mean_all(Tape* tape, const TensorPtr& x) {
    if (x->numel() == 0) throw ShapeError("mean_all: empty tensor");
    return scale(tape, sum_all(tape, x), 1.0 / static_cast<double>(x->numel()));
}

TensorPtr cross_entropy(Tape* tape, const TensorPtr& logits,
                        const std::vector<int>& labels) {
    std::size_t batch = logits->rows(), classes = logits->cols();
    if (labels.size() != batch)
        throw ShapeError("cross_entropy: one label per row expected");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw DataError("cross_entropy: label out of range at row " +
                            std::to_string(i));
    if (batch == 0) throw ShapeError("cross_entropy: empty batch");

    auto probs = std::make_shared<std::vector<double>>(batch * classes);
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const double* row = logits->value.data() + i * classes;
        double mx = *std::max_element(row, row + classes);
        double z = 0.0;
        for (std::size_t j = 0; j < classes; ++j) z += std::exp(row[j] - mx);
        double lse = mx + std::log(z);
        total += lse - row[labels[i]];
        for (std::size_t j = 0; j < classes; ++j)
            (*probs)[i * classes + j] = std::exp(row[j] - lse);
    }
    auto out = Tensor::scalar(total / static_cast<double>(batch));
    if (wants_grad(tape, {logits})) {
        out->requires_grad = true;
        tape->record({logits}, out, [logits, out, probs, labels, batch, classes] {
            double inv = out->adjoint[0] / static_cast<double>(batch);
            for (std::size_t i = 0; i < batch; ++i)
                for (std::size_t j = 0; j < classes; ++j) {
                    double p = (*probs)[i * classes + j];
                    double onehot = static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0;
                    logits->adjoint[i * classes + j] += inv * (p - onehot);
                }
        });
    }
    return out;
}

} // namespace chirpfuse::ops
