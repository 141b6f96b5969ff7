#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace chirpfuse {

// One class archetype: a tone with optional linear chirp and amplitude
// modulation. The three knobs give the spectral channels complementary
// structure (carrier position, frequency drift, envelope rate).
struct SynthClass {
    double base_freq_hz = 0.0;
    double chirp_hz_per_s = 0.0;
    double am_rate_hz = 0.0;

    bool operator==(const SynthClass&) const = default;
};

struct SynthSpec {
    std::size_t n_classes = 5;
    std::size_t clips_per_class = 200;
    double duration_seconds = 3.0;
    double snr = 10.0; // linear signal-to-noise power ratio
    std::uint32_t sample_rate = 22050;
    std::uint64_t seed = 42;
    // Empty: derived per class (spread carriers, cycling chirp and AM).
    std::vector<SynthClass> archetypes;

    void validate() const;
    SynthClass archetype(std::size_t cls) const;
};

// Writes <out_dir>/wavs/*.wav and <out_dir>/manifest.csv with a stratified
// 70/10/20 train/val/test split (per class, in clip order). Deterministic:
// the same spec and seed produce bitwise-identical files. Returns the
// manifest path.
std::string generate_dataset(const SynthSpec& spec, const std::string& out_dir);

} // namespace chirpfuse
