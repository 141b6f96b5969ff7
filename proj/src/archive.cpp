#include "chirpfuse/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "chirpfuse/error.hpp"

namespace chirpfuse {

namespace {

void wr_u16(std::ostream& os, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    os.write(b, 2);
}

void wr_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

void wr_f32(std::ostream& os, const float* p, std::size_t n) {
    // Little-endian hosts only; asserted at build time below.
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 4));
}

static_assert(std::endian::native == std::endian::little,
              "archive IO assumes a little-endian host");

class Reader {
public:
    Reader(const std::string& path) : path_(path), f_(path, std::ios::binary) {
        if (!f_) throw DataError("cannot open archive: " + path);
    }

    std::uint16_t u16() {
        unsigned char b[2];
        take(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint32_t u32() {
        unsigned char b[4];
        take(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::string str(std::size_t n) {
        std::string s(n, '\0');
        take(s.data(), n);
        return s;
    }

    void f32(float* p, std::size_t n) { take(p, n * 4); }

    bool at_eof() {
        f_.peek();
        return f_.eof();
    }

private:
    void take(void* dst, std::size_t n) {
        f_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(f_.gcount()) != n)
            throw DataError("truncated archive: " + path_);
    }

    std::string path_;
    std::ifstream f_;
};

std::string sidecar_path(const std::string& path) {
    return path + ".norm.json";
}

} // namespace

void write_stack_archive(const std::string& path, const StackArchive& archive) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write archive: " + path);
    std::size_t cells = 3 * archive.height * archive.width;
    f.write("SSLF", 4);
    wr_u16(f, 1);
    wr_u32(f, static_cast<std::uint32_t>(archive.records.size()));
    for (const auto& r : archive.records) {
        if (r.data.size() != cells)
            throw InternalError("stack record '" + r.id + "' has wrong cell count");
        wr_u32(f, static_cast<std::uint32_t>(r.id.size()));
        f.write(r.id.data(), static_cast<std::streamsize>(r.id.size()));
        wr_f32(f, r.data.data(), cells);
        wr_u32(f, r.label);
    }
    if (!f) throw DataError("short write to " + path);
    f.close();

    nlohmann::json side;
    side["height"] = archive.height;
    side["width"] = archive.width;
    side["channel_mean"] = archive.stats.mean;
    side["channel_std"] = archive.stats.stdev;
    std::ofstream sf(sidecar_path(path), std::ios::trunc);
    if (!sf) throw DataError("cannot write archive sidecar: " + sidecar_path(path));
    sf << side.dump(2) << "\n";
}

StackArchive read_stack_archive(const std::string& path) {
    StackArchive archive;
    {
        std::ifstream sf(sidecar_path(path));
        if (!sf)
            throw DataError("missing archive sidecar (grid extents unknown): " +
                            sidecar_path(path));
        nlohmann::json side;
        try {
            sf >> side;
            archive.height = side.at("height").get<std::size_t>();
            archive.width = side.at("width").get<std::size_t>();
            auto mean = side.at("channel_mean").get<std::vector<double>>();
            auto stdev = side.at("channel_std").get<std::vector<double>>();
            if (mean.size() != 3 || stdev.size() != 3)
                throw DataError("sidecar stats must have 3 channels");
            std::copy(mean.begin(), mean.end(), archive.stats.mean.begin());
            std::copy(stdev.begin(), stdev.end(), archive.stats.stdev.begin());
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed archive sidecar " + sidecar_path(path) + ": " +
                            e.what());
        }
    }

    Reader rd(path);
    if (rd.str(4) != "SSLF") throw DataError("bad magic in " + path);
    if (rd.u16() != 1) throw DataError("unsupported archive version in " + path);
    std::uint32_t n = rd.u32();
    std::size_t cells = 3 * archive.height * archive.width;
    archive.records.resize(n);
    for (auto& r : archive.records) {
        r.id = rd.str(rd.u32());
        r.data.resize(cells);
        rd.f32(r.data.data(), cells);
        r.label = rd.u32();
    }
    return archive;
}

void write_embedding_archive(const std::string& path, const EmbeddingArchive& archive) {
    if (archive.labels && archive.labels->size() != archive.records.size())
        throw InternalError("embedding labels must parallel records");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write archive: " + path);
    f.write("SSLE", 4);
    wr_u16(f, 1);
    wr_u32(f, archive.d_emb);
    wr_u32(f, static_cast<std::uint32_t>(archive.records.size()));
    for (const auto& r : archive.records) {
        if (r.vec.size() != archive.d_emb)
            throw InternalError("embedding record '" + r.id + "' has wrong length");
        wr_u32(f, static_cast<std::uint32_t>(r.id.size()));
        f.write(r.id.data(), static_cast<std::streamsize>(r.id.size()));
        wr_f32(f, r.vec.data(), r.vec.size());
    }
    if (archive.labels)
        for (std::uint32_t label : *archive.labels) wr_u32(f, label);
    if (!f) throw DataError("short write to " + path);
}

EmbeddingArchive read_embedding_archive(const std::string& path) {
    Reader rd(path);
    if (rd.str(4) != "SSLE") throw DataError("bad magic in " + path);
    if (rd.u16() != 1) throw DataError("unsupported archive version in " + path);
    EmbeddingArchive archive;
    archive.d_emb = rd.u32();
    std::uint32_t n = rd.u32();
    archive.records.resize(n);
    for (auto& r : archive.records) {
        r.id = rd.str(rd.u32());
        r.vec.resize(archive.d_emb);
        rd.f32(r.vec.data(), archive.d_emb);
    }
    if (!rd.at_eof()) {
        std::vector<std::uint32_t> labels(n);
        for (auto& label : labels) label = rd.u32();
        if (!rd.at_eof()) throw DataError("trailing bytes in " + path);
        archive.labels = std::move(labels);
    }
    return archive;
}

} // namespace chirpfuse
