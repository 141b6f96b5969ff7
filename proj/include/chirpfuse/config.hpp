#pragma once

#include <optional>
#include <string>

#include "chirpfuse/model.hpp"
#include "chirpfuse/spectral.hpp"
#include "chirpfuse/synth.hpp"
#include "chirpfuse/trainer.hpp"

namespace chirpfuse {

struct ProviderConfig {
    std::string kind = "pseudo"; // pseudo | file
    std::size_t d_emb = 256;
    std::uint64_t seed = 42; // pseudo projection seed

    void validate() const;
};

// Everything a command needs, read from one JSON file. Validation is
// strict: unknown keys anywhere fail with the offending key path before
// any work starts. Flags override file values.
struct RunConfig {
    SpectralConfig spectral;
    ProviderConfig provider;
    TrainConfig train;
    SynthSpec synth;
    std::vector<std::size_t> sweep_budgets;

    // model/fusion settings; n_classes is filled from the manifest later.
    std::size_t d = 128;
    std::string strategy = "fixed";
    std::string branch = "both";
    double tau1 = 1.0;
    double tau2 = 1.0;

    std::string manifest_path;
    std::string features_path;
    std::string embeddings_path;
    std::string out_dir = ".";

    // Builds the architecture descriptor for a given class count.
    ModelConfig model_config(std::size_t n_classes) const;
};

// Parses and validates the file; path empty returns all defaults.
RunConfig load_run_config(const std::string& path);

} // namespace chirpfuse
