#include "chirpfuse/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "chirpfuse/error.hpp"

namespace chirpfuse {

namespace {

std::uint16_t rd_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t rd_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

void wr_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

void wr_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

} // namespace

AudioClip load_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open audio file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw DataError("not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;
    bool have_fmt = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        std::uint32_t chunk_len = rd_u32(hdr + 4);
        if (pos + 8 + chunk_len > bytes.size())
            throw DataError("truncated chunk in " + path);
        const unsigned char* body = hdr + 8;
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw DataError("malformed fmt chunk in " + path);
            format = rd_u16(body);
            channels = rd_u16(body + 2);
            rate = rd_u32(body + 4);
            bits = rd_u16(body + 14);
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data = body;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);
    }

    if (!have_fmt) throw DataError("missing fmt chunk in " + path);
    if (channels != 1 && channels != 2)
        throw DataError("unsupported channel count " + std::to_string(channels) +
                        " in " + path);
    bool pcm16 = format == 1 && bits == 16;
    bool float32 = format == 3 && bits == 32;
    if (!pcm16 && !float32)
        throw DataError("unsupported codec (format " + std::to_string(format) +
                        ", " + std::to_string(bits) + " bit) in " + path);
    if (!data || data_len == 0) throw DataError("no sample data in " + path);
    if (rate == 0) throw DataError("zero sample rate in " + path);

    std::size_t bytes_per = pcm16 ? 2 : 4;
    std::size_t n_frames = data_len / (bytes_per * channels);
    if (n_frames == 0) throw DataError("no sample data in " + path);

    AudioClip clip;
    clip.sample_rate = rate;
    clip.source_id = path;
    clip.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (i * channels + c) * bytes_per;
            if (pcm16) {
                std::int16_t raw;
                std::memcpy(&raw, p, 2);
                acc += static_cast<double>(raw) / 32768.0;
            } else {
                float raw;
                std::memcpy(&raw, p, 4);
                acc += static_cast<double>(raw);
            }
        }
        double v = acc / channels;
        if (!std::isfinite(v) || v < -1.0 || v > 1.0)
            throw DataError("sample out of range in " + path);
        clip.samples[i] = v;
    }
    return clip;
}

void write_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                     std::uint32_t sample_rate) {
    std::string out;
    std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
    out.reserve(44 + data_len);
    out += "RIFF";
    wr_u32(out, 36 + data_len);
    out += "WAVEfmt ";
    wr_u32(out, 16);
    wr_u16(out, 1);  // PCM
    wr_u16(out, 1);  // mono
    wr_u32(out, sample_rate);
    wr_u32(out, sample_rate * 2);
    wr_u16(out, 2);
    wr_u16(out, 16);
    out += "data";
    wr_u32(out, data_len);
    for (double s : samples) {
        // Symmetric with the 1/32768 decode scale so a decode/encode cycle
        // reproduces the stored words exactly.
        long q = std::lrint(std::min(1.0, std::max(-1.0, s)) * 32768.0);
        q = std::min(32767L, std::max(-32768L, q));
        wr_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write audio file: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("short write to " + path);
}

std::vector<AudioClip> segment(const AudioClip& clip, double clip_seconds,
                               double clip_hop_seconds) {
    if (clip_seconds <= 0.0 || clip_hop_seconds <= 0.0)
        throw ConfigError("segment: window and hop must be positive");
    std::size_t win = static_cast<std::size_t>(
        std::lrint(clip_seconds * clip.sample_rate));
    std::size_t hop = static_cast<std::size_t>(
        std::lrint(clip_hop_seconds * clip.sample_rate));
    if (win == 0 || hop == 0)
        throw ConfigError("segment: window and hop shorter than one sample");

    std::vector<AudioClip> out;
    std::size_t n = clip.samples.size();
    auto emit = [&](std::size_t start, std::size_t avail) {
        AudioClip seg;
        seg.sample_rate = clip.sample_rate;
        seg.source_id = clip.source_id + "#" + std::to_string(out.size());
        seg.samples.assign(win, 0.0);
        std::copy(clip.samples.begin() + start, clip.samples.begin() + start + avail,
                  seg.samples.begin());
        out.push_back(std::move(seg));
    };

    if (n < win) {
        // Whole-clip special case: one padded segment regardless of coverage.
        emit(0, n);
        return out;
    }
    for (std::size_t start = 0; start < n; start += hop) {
        std::size_t avail = n - start;
        if (avail >= win) {
            emit(start, win);
        } else {
            if (2 * avail >= win) emit(start, avail);
            break;
        }
    }
    return out;
}

} // namespace chirpfuse
