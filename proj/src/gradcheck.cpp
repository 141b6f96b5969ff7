#include "chirpfuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "chirpfuse/error.hpp"

namespace chirpfuse {

double grad_check_params(const std::function<TensorPtr(Tape*)>& forward,
                         const std::vector<TensorPtr>& params, double eps) {
    if (eps <= 0.0) throw InternalError("grad_check: eps must be positive");
    for (const auto& p : params) {
        if (!p->requires_grad)
            throw InternalError("grad_check: param does not require grad");
        p->ensure_grad();
        p->zero_grad();
    }

    Tape tape;
    TensorPtr loss = forward(&tape);
    if (loss->numel() != 1) throw InternalError("grad_check: loss must be scalar");
    tape.backward(loss);

    double worst = 0.0;
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            double v = p->value[i];
            p->value[i] = v + eps;
            double up = forward(nullptr)->value[0];
            p->value[i] = v - eps;
            double dn = forward(nullptr)->value[0];
            p->value[i] = v;
            double fd = (up - dn) / (2.0 * eps);
            double an = p->grad[i];
            double rel = std::abs(an - fd) / std::max(1.0, std::abs(an));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

double grad_check(const std::function<TensorPtr(Tape*, const TensorPtr&)>& f,
                  const TensorPtr& point, double eps) {
    point->requires_grad = true;
    return grad_check_params([&](Tape* tape) { return f(tape, point); }, {point}, eps);
}

} // namespace chirpfuse
