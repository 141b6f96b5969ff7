#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "chirpfuse/autodiff.hpp"
#include "chirpfuse/rng.hpp"

namespace chirpfuse {

enum class FusionStrategy { fixed, shared, sampling };
enum class BranchMode { both, spectral, semantic };

FusionStrategy fusion_strategy_from_name(const std::string& name);
std::string fusion_strategy_name(FusionStrategy s);
BranchMode branch_mode_from_name(const std::string& name);
std::string branch_mode_name(BranchMode b);

// Architecture descriptor. Parameter counts are a pure function of these
// fields; see the closed-form expressions asserted in the tests.
struct ModelConfig {
    std::size_t d = 128;      // branch feature length
    std::size_t d_emb = 256;  // learned-branch input length
    std::size_t input_height = 64;
    std::size_t input_width = 64;
    std::array<std::size_t, 3> conv_widths{8, 16, 32};
    std::size_t head_hidden = 64;
    std::size_t n_classes = 0;
    FusionStrategy strategy = FusionStrategy::fixed;
    BranchMode branch = BranchMode::both;
    double tau1 = 1.0;
    double tau2 = 1.0;

    void validate() const;
    // Width of the head input under this strategy and branch mode.
    std::size_t fused_width() const;
};

// Strategy-specific fusion parameters. Both branch features are [1 x d]
// rows. The "lift" maps produce the relu gates that modulate the
// dimension-doubled features; the "logit" maps feed the per-unit two-way
// Gumbel-Softmax relaxation.
struct FusionParams {
    std::size_t d = 0;
    FusionStrategy strategy = FusionStrategy::fixed;
    double tau1 = 1.0;
    double tau2 = 1.0;

    // shared: gate for one branch is computed from the other branch.
    TensorPtr gate_spe_w, gate_spe_b; // sigmoid(f_sem * W + b) gates f_spe
    TensorPtr gate_sem_w, gate_sem_b; // sigmoid(f_spe * W + b) gates f_sem

    // sampling
    TensorPtr lift_spe_w, lift_spe_b;   // relu(f_sem * W + b) gates repeat2(f_spe)
    TensorPtr lift_sem_w, lift_sem_b;   // relu(f_spe * W + b) gates repeat2(f_sem)
    TensorPtr logit_spe_w, logit_spe_b; // f_spe logits -> s_spe at tau2
    TensorPtr logit_sem_w, logit_sem_b; // f_sem logits -> s_sem at tau1

    std::vector<TensorPtr> parameters() const;
};

// Duplicates each unit in place: [1 x d] -> [1 x 2d] with layout
// (x0, x0, x1, x1, ...), matching the pair layout of the GS relaxation.
TensorPtr repeat2(Tape* tape, const TensorPtr& x);

TensorPtr fuse_fixed(Tape* tape, const TensorPtr& f_spe, const TensorPtr& f_sem);
TensorPtr fuse_shared(Tape* tape, const TensorPtr& f_spe, const TensorPtr& f_sem,
                      const FusionParams& params);
// noise = nullptr pins the Gumbel draws to zero.
TensorPtr fuse_sampling(Tape* tape, const TensorPtr& f_spe, const TensorPtr& f_sem,
                        const FusionParams& params, Rng* noise);
TensorPtr fuse(Tape* tape, const TensorPtr& f_spe, const TensorPtr& f_sem,
               const FusionParams& params, Rng* noise);

std::size_t count_params(const std::vector<TensorPtr>& params);

// Full classifier: spectral conv encoder + semantic perceptron + fusion +
// MLP head. All parameters are named, initialized from the "init" stream
// (uniform +-sqrt(6/fan_in) weights, zero biases), and exposed in a stable
// order for the optimizer and the bundle format.
class Model {
public:
    explicit Model(ModelConfig cfg);

    void init(Rng& rng);

    const ModelConfig& config() const { return cfg_; }
    const std::vector<TensorPtr>& parameters() const { return params_; }
    TensorPtr param(const std::string& name) const;

    // stack is [3 x H x W]; embedding is [1 x d_emb]. Either may be null
    // when the branch mode ignores it.
    TensorPtr spectral_feature(Tape* tape, const TensorPtr& stack) const;
    TensorPtr semantic_feature(Tape* tape, const TensorPtr& embedding) const;
    TensorPtr fused_feature(Tape* tape, const TensorPtr& stack,
                            const TensorPtr& embedding, Rng* noise) const;
    TensorPtr logits(Tape* tape, const TensorPtr& stack, const TensorPtr& embedding,
                     Rng* noise) const;
    TensorPtr head(Tape* tape, const TensorPtr& fused) const;

    const FusionParams& fusion_params() const { return fusion_; }

private:
    TensorPtr add_param(const std::string& name, std::vector<std::size_t> shape);

    ModelConfig cfg_;
    FusionParams fusion_;
    std::vector<TensorPtr> params_;

    TensorPtr conv_w_[3], conv_b_[3];
    TensorPtr spe_proj_w_, spe_proj_b_;
    TensorPtr sem_w1_, sem_b1_, sem_w2_, sem_b2_;
    TensorPtr head_w1_, head_b1_, head_w2_, head_b2_;
};

} // namespace chirpfuse
