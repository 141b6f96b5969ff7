#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "chirpfuse/audio.hpp"
#include "chirpfuse/spectral.hpp"

namespace chirpfuse {

// Source of per-clip learned-branch vectors. The file-backed provider is
// the drop-in point for embeddings computed by an external pretrained
// backbone; the pseudo provider is a deterministic stand-in.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<double> provide(const AudioClip& clip) = 0;
};

// Returns vectors stored in an "SSLE" archive verbatim, keyed by the clip's
// source_id.
class FileEmbeddingProvider : public EmbeddingProvider {
public:
    // expected_dim 0 accepts whatever the archive header declares.
    FileEmbeddingProvider(const std::string& archive_path, std::size_t expected_dim = 0);

    std::size_t dimension() const override { return dim_; }
    std::vector<double> provide(const AudioClip& clip) override;
    std::vector<double> lookup(const std::string& id) const;

private:
    std::size_t dim_;
    std::string path_;
    std::unordered_map<std::string, std::vector<double>> table_;
};

// Seeded fixed random projection of the clip's log-mel summary statistics
// (per-band mean and standard deviation over frames, each half centered).
// Same clip and seed always give the same vector.
class PseudoEmbeddingProvider : public EmbeddingProvider {
public:
    PseudoEmbeddingProvider(std::uint64_t seed, std::size_t dim, SpectralConfig cfg);

    std::size_t dimension() const override { return dim_; }
    std::vector<double> provide(const AudioClip& clip) override;

private:
    std::size_t dim_;
    SpectralConfig cfg_;
    std::vector<double> projection_; // dim x (2 * n_mels), row-major
};

} // namespace chirpfuse
