#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chirpfuse/archive.hpp"
#include "chirpfuse/embedding.hpp"
#include "chirpfuse/metrics.hpp"
#include "chirpfuse/model.hpp"
#include "chirpfuse/spectral.hpp"

namespace chirpfuse {

struct ManifestRecord {
    std::string id;
    std::string path; // resolved against the manifest's directory
    std::string label;
    std::string split; // train | val | test
    int label_index = -1;
};

// CSV with header id,path,label,split. Labels are indexed by sorted unique
// name; ids must be unique; at least one train and one test row required.
struct Manifest {
    std::vector<ManifestRecord> records;
    std::vector<std::string> vocabulary;
};

Manifest load_manifest(const std::string& path);

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 42;
    std::optional<std::size_t> samples_per_class;

    void validate() const;
};

// Bias-corrected adaptive-moment optimizer over a fixed parameter list;
// step() consumes the gradients currently stored on the parameters.
class Adam {
public:
    Adam(std::vector<TensorPtr> params, double lr, double beta1, double beta2,
         double eps);

    void step();
    void zero_grad();

private:
    std::vector<TensorPtr> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
};

struct Example {
    std::string id;
    int label = -1;
    TensorPtr stack;     // [3 x H x W], standardized
    TensorPtr embedding; // [1 x d_emb]
};

struct Dataset {
    std::vector<Example> train, val, test;
    std::vector<std::string> vocabulary;
    std::size_t height = 0, width = 0;
    ChannelStats stats;

    const std::vector<Example>& split(const std::string& name) const;
};

// Joins manifest rows with archive features and provider embeddings.
// provider may be null only when embeddings are never consumed
// (branch = spectral). Pseudo providers read the WAV at each record's path
// and embed its first segment window.
Dataset build_dataset(const Manifest& manifest, const StackArchive& features,
                      EmbeddingProvider* provider, const SpectralConfig& cfg);

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
};

// Trains the model in place. Deterministic given the seed: shuffling uses
// the "shuffle" stream, Gumbel draws the "gumbel" stream, initialization
// the "init" stream. samples_per_class keeps the first k train rows per
// class in manifest order.
TrainResult train_model(Model& model, const Dataset& data, const TrainConfig& cfg);

// Pinned-noise evaluation; ties in the argmax go to the lowest class index.
Metrics evaluate_model(const Model& model, const std::vector<Example>& examples);

struct SweepRow {
    std::string strategy;
    std::size_t budget = 0;
    Metrics metrics;
};

// One train + test evaluation per (strategy, budget), each from a fresh
// seed-derived initialization. Budgets must be ascending and within the
// available per-class train count.
std::vector<SweepRow> label_budget_sweep(const Dataset& data, const ModelConfig& base,
                                         const TrainConfig& cfg,
                                         const std::vector<std::size_t>& budgets,
                                         const std::vector<FusionStrategy>& strategies);

// Bundle file: one JSON header line (config, vocabulary, stats, seed), then
// a binary blob of named tensors (u32 count; per tensor u32 name length +
// name, u32 rank, u32 extents, float64 little-endian values).
struct ModelBundle {
    ModelConfig model;
    SpectralConfig spectral;
    ChannelStats stats;
    std::vector<std::string> vocabulary;
    std::uint64_t seed = 0;
    std::shared_ptr<Model> net;
};

void save_bundle(const std::string& path, const Model& model,
                 const SpectralConfig& spectral, const ChannelStats& stats,
                 const std::vector<std::string>& vocabulary, std::uint64_t seed);
ModelBundle load_bundle(const std::string& path);

} // namespace chirpfuse
