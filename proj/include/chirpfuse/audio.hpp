#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace chirpfuse {

// Mono audio in [-1, 1] at a known rate.
struct AudioClip {
    std::vector<double> samples;
    std::uint32_t sample_rate = 0;
    std::string source_id;
};

// Reads a RIFF/WAVE file: PCM 16-bit or IEEE float 32-bit, mono or stereo.
// Stereo is averaged to mono; 16-bit samples are mapped by division by
// 32768. Throws DataError on anything else.
AudioClip load_wav(const std::string& path);

// Writes mono PCM 16-bit; samples are clamped to [-1, 1] and scaled by
// 32767.
void write_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                     std::uint32_t sample_rate);

// Fixed-length windows of clip_seconds at stride clip_hop_seconds. A final
// partial window is zero-padded when it covers at least half a window and
// dropped otherwise; a clip shorter than one window always yields one
// zero-padded segment. Segment ids are source_id + "#<index>".
std::vector<AudioClip> segment(const AudioClip& clip, double clip_seconds,
                               double clip_hop_seconds);

} // namespace chirpfuse
