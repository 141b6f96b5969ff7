#include "chirpfuse/model.hpp"

#include <cmath>

#include "chirpfuse/error.hpp"
#include "chirpfuse/ops.hpp"

namespace chirpfuse {

FusionStrategy fusion_strategy_from_name(const std::string& name) {
    if (name == "fixed") return FusionStrategy::fixed;
    if (name == "shared") return FusionStrategy::shared;
    if (name == "sampling") return FusionStrategy::sampling;
    throw ConfigError("fusion.strategy must be one of fixed|shared|sampling, got '" +
                      name + "'");
}

std::string fusion_strategy_name(FusionStrategy s) {
    switch (s) {
    case FusionStrategy::fixed: return "fixed";
    case FusionStrategy::shared: return "shared";
    case FusionStrategy::sampling: return "sampling";
    }
    throw InternalError("unknown fusion strategy");
}

BranchMode branch_mode_from_name(const std::string& name) {
    if (name == "both") return BranchMode::both;
    if (name == "spectral") return BranchMode::spectral;
    if (name == "semantic") return BranchMode::semantic;
    throw ConfigError("model.branch must be one of both|spectral|semantic, got '" +
                      name + "'");
}

std::string branch_mode_name(BranchMode b) {
    switch (b) {
    case BranchMode::both: return "both";
    case BranchMode::spectral: return "spectral";
    case BranchMode::semantic: return "semantic";
    }
    throw InternalError("unknown branch mode");
}

void ModelConfig::validate() const {
    if (d == 0) throw ConfigError("fusion.d must be positive");
    if (d_emb == 0) throw ConfigError("provider.d_emb must be positive");
    if (n_classes < 2) throw ConfigError("model needs at least 2 classes");
    if (head_hidden == 0) throw ConfigError("model.head_hidden must be positive");
    if (input_height % 8 != 0 || input_width % 8 != 0 || input_height == 0 ||
        input_width == 0)
        throw ConfigError("spectral target extents must be positive multiples of 8 "
                          "(three 2x2 pooling stages)");
    if (tau1 <= 0.0 || tau2 <= 0.0)
        throw ConfigError("fusion temperatures must be positive");
    for (std::size_t wdt : conv_widths)
        if (wdt == 0) throw ConfigError("conv widths must be positive");
}

std::size_t ModelConfig::fused_width() const {
    if (branch != BranchMode::both) return d;
    switch (strategy) {
    case FusionStrategy::fixed:
    case FusionStrategy::shared: return 2 * d;
    case FusionStrategy::sampling: return 4 * d;
    }
    throw InternalError("unknown fusion strategy");
}

std::vector<TensorPtr> FusionParams::parameters() const {
    switch (strategy) {
    case FusionStrategy::fixed: return {};
    case FusionStrategy::shared:
        return {gate_spe_w, gate_spe_b, gate_sem_w, gate_sem_b};
    case FusionStrategy::sampling:
        return {lift_spe_w, lift_spe_b, lift_sem_w, lift_sem_b,
                logit_spe_w, logit_spe_b, logit_sem_w, logit_sem_b};
    }
    throw InternalError("unknown fusion strategy");
}

namespace {

void require_feature_pair(const TensorPtr& f_spe, const TensorPtr& f_sem) {
    if (f_spe->shape.size() != 2 || f_sem->shape.size() != 2 ||
        f_spe->shape[0] != 1 || f_sem->shape[0] != 1 ||
        f_spe->shape[1] != f_sem->shape[1])
        throw ShapeError("fusion expects two [1 x d] features of equal length");
}

TensorPtr linear(Tape* tape, const TensorPtr& x, const TensorPtr& w,
                 const TensorPtr& b) {
    return ops::add_bias(tape, ops::matmul(tape, x, w), b);
}

} // namespace

TensorPtr repeat2(Tape* tape, const TensorPtr& x) {
    std::size_t d = x->cols();
    auto col = ops::reshape(tape, x, {d, 1});
    auto pairs = ops::concat(tape, 1, {col, col});
    return ops::reshape(tape, pairs, {1, 2 * d});
}

TensorPtr fuse_fixed(Tape* tape, const TensorPtr& f_spe, const TensorPtr& f_sem) {
    require_feature_pair(f_spe, f_sem);
    return ops::concat(tape, 1, {f_spe, f_sem});
}

TensorPtr fuse_shared(Tape* tape, const TensorPtr& f_spe, const TensorPtr& f_sem,
                      const FusionParams& params) {
    require_feature_pair(f_spe, f_sem);
    auto w_sem = ops::sigmoid(tape, linear(tape, f_spe, params.gate_sem_w,
                                           params.gate_sem_b));
    auto w_spe = ops::sigmoid(tape, linear(tape, f_sem, params.gate_spe_w,
                                           params.gate_spe_b));
    auto gated_spe = ops::mul(tape, f_spe, w_spe);
    auto gated_sem = ops::mul(tape, f_sem, w_sem);
    return ops::concat(tape, 1, {gated_spe, gated_sem});
}

TensorPtr fuse_sampling(Tape* tape, const TensorPtr& f_spe, const TensorPtr& f_sem,
                        const FusionParams& params, Rng* noise) {
    require_feature_pair(f_spe, f_sem);
    std::size_t d = f_spe->cols();

    auto lifted_sem = ops::mul(
        tape, repeat2(tape, f_sem),
        ops::relu(tape, linear(tape, f_spe, params.lift_sem_w, params.lift_sem_b)));
    auto lifted_spe = ops::mul(
        tape, repeat2(tape, f_spe),
        ops::relu(tape, linear(tape, f_sem, params.lift_spe_w, params.lift_spe_b)));

    // Per-unit two-way relaxation: logits reshaped to d pairs, Gumbel-
    // Softmax over each pair, flattened back. Draw order is s_sem (tau1)
    // then s_spe (tau2).
    auto gs_flat = [&](const TensorPtr& feat, const TensorPtr& w, const TensorPtr& b,
                       double tau) {
        auto logits = ops::reshape(tape, linear(tape, feat, w, b), {d, 2});
        auto s = ops::gumbel_softmax(tape, logits, tau, noise);
        return ops::reshape(tape, s, {1, 2 * d});
    };
    auto s_sem = gs_flat(f_sem, params.logit_sem_w, params.logit_sem_b, params.tau1);
    auto s_spe = gs_flat(f_spe, params.logit_spe_w, params.logit_spe_b, params.tau2);

    auto h_spe = ops::mul(tape, lifted_spe, s_spe);
    auto h_sem = ops::mul(tape, lifted_sem, s_sem);
    return ops::concat(tape, 1, {h_spe, h_sem});
}

TensorPtr fuse(Tape* tape, const TensorPtr& f_spe, const TensorPtr& f_sem,
               const FusionParams& params, Rng* noise) {
    switch (params.strategy) {
    case FusionStrategy::fixed: return fuse_fixed(tape, f_spe, f_sem);
    case FusionStrategy::shared: return fuse_shared(tape, f_spe, f_sem, params);
    case FusionStrategy::sampling:
        return fuse_sampling(tape, f_spe, f_sem, params, noise);
    }
    throw ConfigError("unknown fusion strategy");
}

std::size_t count_params(const std::vector<TensorPtr>& params) {
    std::size_t n = 0;
    for (const auto& p : params)
        if (p && p->requires_grad) n += p->numel();
    return n;
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::size_t d = cfg_.d;

    bool use_spe = cfg_.branch != BranchMode::semantic;
    bool use_sem = cfg_.branch != BranchMode::spectral;

    if (use_spe) {
        std::size_t cin = 3;
        for (std::size_t i = 0; i < 3; ++i) {
            std::size_t cout = cfg_.conv_widths[i];
            std::string tag = std::to_string(i + 1);
            conv_w_[i] = add_param("conv" + tag + ".w", {cout, cin, 3, 3});
            conv_b_[i] = add_param("conv" + tag + ".b", {cout});
            cin = cout;
        }
        spe_proj_w_ = add_param("spe_proj.w", {cfg_.conv_widths[2], d});
        spe_proj_b_ = add_param("spe_proj.b", {1, d});
    }
    if (use_sem) {
        sem_w1_ = add_param("sem1.w", {cfg_.d_emb, d});
        sem_b1_ = add_param("sem1.b", {1, d});
        sem_w2_ = add_param("sem2.w", {d, d});
        sem_b2_ = add_param("sem2.b", {1, d});
    }

    fusion_.d = d;
    fusion_.strategy = cfg_.strategy;
    fusion_.tau1 = cfg_.tau1;
    fusion_.tau2 = cfg_.tau2;
    if (cfg_.branch == BranchMode::both) {
        if (cfg_.strategy == FusionStrategy::shared) {
            fusion_.gate_spe_w = add_param("fuse.gate_spe.w", {d, d});
            fusion_.gate_spe_b = add_param("fuse.gate_spe.b", {1, d});
            fusion_.gate_sem_w = add_param("fuse.gate_sem.w", {d, d});
            fusion_.gate_sem_b = add_param("fuse.gate_sem.b", {1, d});
        } else if (cfg_.strategy == FusionStrategy::sampling) {
            fusion_.lift_spe_w = add_param("fuse.lift_spe.w", {d, 2 * d});
            fusion_.lift_spe_b = add_param("fuse.lift_spe.b", {1, 2 * d});
            fusion_.lift_sem_w = add_param("fuse.lift_sem.w", {d, 2 * d});
            fusion_.lift_sem_b = add_param("fuse.lift_sem.b", {1, 2 * d});
            fusion_.logit_spe_w = add_param("fuse.logit_spe.w", {d, 2 * d});
            fusion_.logit_spe_b = add_param("fuse.logit_spe.b", {1, 2 * d});
            fusion_.logit_sem_w = add_param("fuse.logit_sem.w", {d, 2 * d});
            fusion_.logit_sem_b = add_param("fuse.logit_sem.b", {1, 2 * d});
        }
    }

    std::size_t fused = cfg_.fused_width();
    head_w1_ = add_param("head1.w", {fused, cfg_.head_hidden});
    head_b1_ = add_param("head1.b", {1, cfg_.head_hidden});
    head_w2_ = add_param("head2.w", {cfg_.head_hidden, cfg_.n_classes});
    head_b2_ = add_param("head2.b", {1, cfg_.n_classes});
}

TensorPtr Model::add_param(const std::string& name, std::vector<std::size_t> shape) {
    auto t = Tensor::zeros(std::move(shape), true);
    t->name = name;
    t->ensure_grad();
    params_.push_back(t);
    return t;
}

TensorPtr Model::param(const std::string& name) const {
    for (const auto& p : params_)
        if (p->name == name) return p;
    throw InternalError("no parameter named '" + name + "'");
}

void Model::init(Rng& rng) {
    Rng stream = rng.stream("init");
    for (const auto& p : params_) {
        bool is_bias = p->name.size() >= 2 && p->name.compare(p->name.size() - 2, 2, ".b") == 0;
        if (is_bias) {
            std::fill(p->value.begin(), p->value.end(), 0.0);
            continue;
        }
        // fan_in: input channel count times receptive field for conv
        // kernels, input width for linear maps.
        std::size_t fan_in = p->shape.size() == 4
                                 ? p->shape[1] * p->shape[2] * p->shape[3]
                                 : p->shape[0];
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& v : p->value) v = stream.uniform(-bound, bound);
        // The head's output layer starts near zero so an untrained model's
        // cross-entropy sits at ln C.
        if (p->name == "head2.w")
            for (double& v : p->value) v *= 0.01;
        p->zero_grad();
    }
}

TensorPtr Model::spectral_feature(Tape* tape, const TensorPtr& stack) const {
    if (!stack || stack->shape.size() != 3 || stack->shape[0] != 3 ||
        stack->shape[1] != cfg_.input_height || stack->shape[2] != cfg_.input_width)
        throw ConfigError("spectral encoder expects a [3 x " +
                          std::to_string(cfg_.input_height) + " x " +
                          std::to_string(cfg_.input_width) + "] stack");
    TensorPtr x = stack;
    for (std::size_t i = 0; i < 3; ++i) {
        x = ops::conv2d3x3(tape, x, conv_w_[i], conv_b_[i]);
        x = ops::relu(tape, x);
        x = ops::mean_pool2(tape, x);
    }
    return linear(tape, ops::mean_hw(tape, x), spe_proj_w_, spe_proj_b_);
}

TensorPtr Model::semantic_feature(Tape* tape, const TensorPtr& embedding) const {
    if (!embedding || embedding->shape.size() != 2 || embedding->shape[0] != 1 ||
        embedding->shape[1] != cfg_.d_emb)
        throw ConfigError("semantic encoder expects a [1 x " +
                          std::to_string(cfg_.d_emb) + "] embedding");
    auto hidden = ops::relu(tape, linear(tape, embedding, sem_w1_, sem_b1_));
    return linear(tape, hidden, sem_w2_, sem_b2_);
}

TensorPtr Model::fused_feature(Tape* tape, const TensorPtr& stack,
                               const TensorPtr& embedding, Rng* noise) const {
    switch (cfg_.branch) {
    case BranchMode::spectral: return spectral_feature(tape, stack);
    case BranchMode::semantic: return semantic_feature(tape, embedding);
    case BranchMode::both:
        return fuse(tape, spectral_feature(tape, stack),
                    semantic_feature(tape, embedding), fusion_, noise);
    }
    throw InternalError("unknown branch mode");
}

TensorPtr Model::head(Tape* tape, const TensorPtr& fused) const {
    if (fused->cols() != cfg_.fused_width())
        throw ConfigError("head expects width " + std::to_string(cfg_.fused_width()) +
                          ", got " + std::to_string(fused->cols()));
    auto hidden = ops::relu(tape, linear(tape, fused, head_w1_, head_b1_));
    return linear(tape, hidden, head_w2_, head_b2_);
}

TensorPtr Model::logits(Tape* tape, const TensorPtr& stack, const TensorPtr& embedding,
                        Rng* noise) const {
    return head(tape, fused_feature(tape, stack, embedding, noise));
}

} // namespace chirpfuse
