#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chirpfuse/spectral.hpp"

namespace chirpfuse {

// Feature archive ("SSLF"): magic, version u16 = 1, n_records u32; per
// record: id (u32 length + UTF-8), 3 x H x W float32 little-endian
// row-major channel-major, label u32. The header carries no extents, so a
// JSON sidecar at <path>.norm.json stores height, width, and the
// per-channel standardization statistics.
struct StackRecord {
    std::string id;
    std::uint32_t label = 0;
    std::vector<float> data; // 3 * height * width
};

struct StackArchive {
    std::size_t height = 0;
    std::size_t width = 0;
    ChannelStats stats;
    std::vector<StackRecord> records;
};

void write_stack_archive(const std::string& path, const StackArchive& archive);
StackArchive read_stack_archive(const std::string& path);

// Embedding archive ("SSLE"): magic, version u16 = 1, d_emb u32, n_records
// u32; per record: id (u32 length + UTF-8), d_emb float32 little-endian.
// An optional block of n_records u32 labels may follow the records (the
// fused-feature dump writes one); readers expose it when present.
struct EmbeddingRecord {
    std::string id;
    std::vector<float> vec;
};

struct EmbeddingArchive {
    std::uint32_t d_emb = 0;
    std::vector<EmbeddingRecord> records;
    std::optional<std::vector<std::uint32_t>> labels; // parallel to records
};

void write_embedding_archive(const std::string& path, const EmbeddingArchive& archive);
EmbeddingArchive read_embedding_archive(const std::string& path);

} // namespace chirpfuse
