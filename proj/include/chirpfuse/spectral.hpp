#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "chirpfuse/audio.hpp"

namespace chirpfuse {

// Row-major 2-D grid of doubles.
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

struct SpectralConfig {
    std::uint32_t sample_rate = 22050;
    std::size_t n_fft = 1024;
    std::size_t hop_length = 256;
    std::size_t n_mels = 64;
    std::size_t n_mfcc = 20;
    double f_min = 150.0;
    double f_max = 11025.0;
    double clip_seconds = 3.0;
    double clip_hop_seconds = 3.0;
    std::size_t target_height = 64;
    std::size_t target_width = 64;

    void validate() const; // throws ConfigError naming the bad field
};

// Triangular mel filters sampled at FFT bin frequencies; each row is
// rescaled so its maximum over bins is exactly 1.
struct FilterBank {
    Grid weights; // n_mels x (n_fft/2 + 1)
    std::vector<double> center_frequencies_hz;
};

// The three feature channels, each target_height x target_width, in the
// fixed order MEL, STFT, MFCC.
struct SpectralStack {
    std::array<Grid, 3> channels;
    std::string source_id;
};

// Per-channel standardization statistics, computed over the train split.
struct ChannelStats {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> stdev{1.0, 1.0, 1.0};
};

// HTK mel scale and its inverse.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

// One-sided DFT of a power-of-two-length real frame.
std::vector<std::complex<double>> fft_real(const std::vector<double>& frame);

// Raw magnitude grid, (n_fft/2 + 1) x n_frames. The clip must provide at
// least one full analysis frame.
Grid stft_magnitude(const std::vector<double>& samples, const SpectralConfig& cfg);

FilterBank mel_filterbank(const SpectralConfig& cfg, std::uint32_t sample_rate);

// log(max(filterbank * magnitude^2, floor)), n_mels x n_frames.
Grid mel_spectrogram(const std::vector<double>& samples, const SpectralConfig& cfg);

// Orthonormal DCT-II of each log-mel column; first n_mfcc rows kept.
Grid mfcc(const std::vector<double>& samples, const SpectralConfig& cfg);

Grid resize_bilinear(const Grid& in, std::size_t h, std::size_t w);

// Full spectral-branch input: [log-mel, log-magnitude, mfcc], each resized
// to the target grid. When stats is non-null each channel is standardized
// as (x - mean) / stdev.
SpectralStack build_spectral_stack(const AudioClip& clip, const SpectralConfig& cfg,
                                   const ChannelStats* stats = nullptr);

} // namespace chirpfuse
