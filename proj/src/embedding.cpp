#include "chirpfuse/embedding.hpp"

#include <cmath>

#include "chirpfuse/archive.hpp"
#include "chirpfuse/error.hpp"
#include "chirpfuse/rng.hpp"

namespace chirpfuse {

FileEmbeddingProvider::FileEmbeddingProvider(const std::string& archive_path,
                                             std::size_t expected_dim)
    : path_(archive_path) {
    EmbeddingArchive archive = read_embedding_archive(archive_path);
    dim_ = archive.d_emb;
    if (expected_dim != 0 && expected_dim != dim_)
        throw DataError("embedding archive " + archive_path + " has dimension " +
                        std::to_string(dim_) + ", expected " +
                        std::to_string(expected_dim));
    for (auto& r : archive.records)
        table_[r.id] = std::vector<double>(r.vec.begin(), r.vec.end());
}

std::vector<double> FileEmbeddingProvider::lookup(const std::string& id) const {
    auto it = table_.find(id);
    if (it == table_.end())
        throw DataError("no embedding for id '" + id + "' in " + path_);
    return it->second;
}

std::vector<double> FileEmbeddingProvider::provide(const AudioClip& clip) {
    return lookup(clip.source_id);
}

PseudoEmbeddingProvider::PseudoEmbeddingProvider(std::uint64_t seed, std::size_t dim,
                                                 SpectralConfig cfg)
    : dim_(dim), cfg_(std::move(cfg)) {
    if (dim_ == 0) throw ConfigError("pseudo embedding dimension must be positive");
    Rng rng = Rng(seed).stream("pseudo_embed");
    std::size_t in = 2 * cfg_.n_mels;
    projection_.resize(dim_ * in);
    double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : projection_) v = s * rng.next_gauss();
}

std::vector<double> PseudoEmbeddingProvider::provide(const AudioClip& clip) {
    if (clip.sample_rate != cfg_.sample_rate)
        throw DataError("clip '" + clip.source_id + "' has sample rate " +
                        std::to_string(clip.sample_rate) + ", expected " +
                        std::to_string(cfg_.sample_rate));
    Grid logmel = mel_spectrogram(clip.samples, cfg_);

    // Per-band mean and standard deviation over frames. Each half is
    // centered so the log floor common to all bands cancels; without this
    // every clip's statistics vector points in nearly the same direction.
    std::size_t n = cfg_.n_mels;
    std::vector<double> stats(2 * n);
    double inv = 1.0 / static_cast<double>(logmel.cols);
    for (std::size_t m = 0; m < n; ++m) {
        double mu = 0.0;
        for (std::size_t t = 0; t < logmel.cols; ++t) mu += logmel.at(m, t);
        mu *= inv;
        double var = 0.0;
        for (std::size_t t = 0; t < logmel.cols; ++t) {
            double d = logmel.at(m, t) - mu;
            var += d * d;
        }
        stats[m] = mu;
        stats[n + m] = std::sqrt(var * inv);
    }
    for (std::size_t half = 0; half < 2; ++half) {
        double mu = 0.0;
        for (std::size_t m = 0; m < n; ++m) mu += stats[half * n + m];
        mu /= static_cast<double>(n);
        for (std::size_t m = 0; m < n; ++m) stats[half * n + m] -= mu;
    }

    std::vector<double> out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        double s = 0.0;
        const double* row = projection_.data() + i * 2 * n;
        for (std::size_t j = 0; j < 2 * n; ++j) s += row[j] * stats[j];
        out[i] = s;
    }
    return out;
}

} // namespace chirpfuse
