#include "chirpfuse/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "chirpfuse/error.hpp"
#include "chirpfuse/kernels.hpp"
#include "chirpfuse/ops.hpp"

namespace chirpfuse {

void SpectralConfig::validate() const {
    if (n_fft == 0 || (n_fft & (n_fft - 1)) != 0)
        throw ConfigError("spectral.n_fft must be a power of two");
    if (hop_length == 0 || hop_length > n_fft)
        throw ConfigError("spectral.hop_length must be in (0, n_fft]");
    if (n_mels == 0) throw ConfigError("spectral.n_mels must be positive");
    if (n_mfcc == 0 || n_mfcc > n_mels)
        throw ConfigError("spectral.n_mfcc must be in [1, n_mels]");
    if (f_min < 0.0 || f_min >= f_max)
        throw ConfigError("spectral requires 0 <= f_min < f_max");
    if (f_max > sample_rate / 2.0)
        throw ConfigError("spectral.f_max exceeds the Nyquist frequency");
    if (clip_seconds <= 0.0 || clip_hop_seconds <= 0.0)
        throw ConfigError("spectral clip window and hop must be positive");
    if (target_height == 0 || target_width == 0)
        throw ConfigError("spectral target extents must be positive");
}

double hz_to_mel(double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                     static_cast<double>(i) / static_cast<double>(n)));
    return w;
}

std::vector<std::complex<double>> fft_real(const std::vector<double>& frame) {
    std::size_t n = frame.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw ConfigError("fft_real: frame length must be a power of two");
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = std::complex<double>(frame[i], 0.0);
    kernels::fft_radix2(buf.data(), n);
    buf.resize(n / 2 + 1);
    return buf;
}

Grid stft_magnitude(const std::vector<double>& samples, const SpectralConfig& cfg) {
    if (samples.size() < cfg.n_fft)
        throw ConfigError("stft: clip shorter than n_fft; segment or pad the input first");
    std::size_t n_frames = 1 + (samples.size() - cfg.n_fft) / cfg.hop_length;
    std::vector<double> window = hann_window(cfg.n_fft);
    Grid out(cfg.n_fft / 2 + 1, n_frames);
    kernels::stft_magnitude(samples.data(), samples.size(), cfg.n_fft, cfg.hop_length,
                            window.data(), n_frames, out.v.data());
    return out;
}

FilterBank mel_filterbank(const SpectralConfig& cfg, std::uint32_t sample_rate) {
    std::size_t n_bins = cfg.n_fft / 2 + 1;
    double mel_lo = hz_to_mel(cfg.f_min);
    double mel_hi = hz_to_mel(cfg.f_max);
    double mel_step = (mel_hi - mel_lo) / static_cast<double>(cfg.n_mels + 1);

    FilterBank fb;
    fb.weights = Grid(cfg.n_mels, n_bins);
    fb.center_frequencies_hz.resize(cfg.n_mels);

    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
        double center = mel_lo + static_cast<double>(m + 1) * mel_step;
        fb.center_frequencies_hz[m] = mel_to_hz(center);
        double row_max = 0.0;
        for (std::size_t b = 0; b < n_bins; ++b) {
            double hz = static_cast<double>(b) * sample_rate /
                        static_cast<double>(cfg.n_fft);
            double w = 1.0 - std::abs(hz_to_mel(hz) - center) / mel_step;
            if (w > 0.0) {
                fb.weights.at(m, b) = w;
                row_max = std::max(row_max, w);
            }
        }
        if (row_max <= 0.0)
            throw ConfigError("mel filter " + std::to_string(m) +
                              " has no FFT bin support; reduce n_mels or n_fft");
        // Rescale so the sampled peak is exactly 1; the analytic peak can
        // fall between bins.
        for (std::size_t b = 0; b < n_bins; ++b) fb.weights.at(m, b) /= row_max;
    }
    return fb;
}

namespace {

Grid log_mel_from_magnitude(const Grid& mag, const SpectralConfig& cfg) {
    Grid power = mag;
    for (double& x : power.v) x *= x;
    FilterBank fb = mel_filterbank(cfg, cfg.sample_rate);
    Grid mel(cfg.n_mels, power.cols);
    kernels::matmul(cfg.n_mels, power.rows, power.cols, fb.weights.v.data(),
                    power.v.data(), mel.v.data());
    for (double& x : mel.v) x = std::log(std::max(x, ops::kLogFloor));
    return mel;
}

Grid mfcc_from_log_mel(const Grid& logmel, const SpectralConfig& cfg) {
    // Orthonormal DCT-II basis, n_mfcc x n_mels.
    std::size_t n = cfg.n_mels;
    Grid dct(cfg.n_mfcc, n);
    for (std::size_t k = 0; k < cfg.n_mfcc; ++k) {
        double s = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            dct.at(k, i) = s * std::cos(std::numbers::pi * static_cast<double>(k) *
                                        (2.0 * static_cast<double>(i) + 1.0) /
                                        (2.0 * static_cast<double>(n)));
    }
    Grid out(cfg.n_mfcc, logmel.cols);
    kernels::matmul(cfg.n_mfcc, n, logmel.cols, dct.v.data(), logmel.v.data(),
                    out.v.data());
    return out;
}

} // namespace

Grid mel_spectrogram(const std::vector<double>& samples, const SpectralConfig& cfg) {
    return log_mel_from_magnitude(stft_magnitude(samples, cfg), cfg);
}

Grid mfcc(const std::vector<double>& samples, const SpectralConfig& cfg) {
    return mfcc_from_log_mel(mel_spectrogram(samples, cfg), cfg);
}

Grid resize_bilinear(const Grid& in, std::size_t h, std::size_t w) {
    if (in.rows == 0 || in.cols == 0 || h == 0 || w == 0)
        throw ConfigError("resize_bilinear: extents must be positive");
    Grid out(h, w);
    kernels::resize_bilinear(in.rows, in.cols, in.v.data(), h, w, out.v.data());
    return out;
}

SpectralStack build_spectral_stack(const AudioClip& clip, const SpectralConfig& cfg,
                                   const ChannelStats* stats) {
    if (clip.sample_rate != cfg.sample_rate)
        throw DataError("clip '" + clip.source_id + "' has sample rate " +
                        std::to_string(clip.sample_rate) + ", expected " +
                        std::to_string(cfg.sample_rate) +
                        " (resampling is not supported)");
    // One STFT feeds all three channels.
    Grid mag = stft_magnitude(clip.samples, cfg);
    Grid logmag = mag;
    for (double& x : logmag.v) x = std::log(std::max(x, ops::kLogFloor));
    Grid logmel = log_mel_from_magnitude(mag, cfg);
    Grid cepstra = mfcc_from_log_mel(logmel, cfg);

    SpectralStack stack;
    stack.source_id = clip.source_id;
    stack.channels[0] = resize_bilinear(logmel, cfg.target_height, cfg.target_width);
    stack.channels[1] = resize_bilinear(logmag, cfg.target_height, cfg.target_width);
    stack.channels[2] = resize_bilinear(cepstra, cfg.target_height, cfg.target_width);
    if (stats) {
        for (std::size_t c = 0; c < 3; ++c) {
            double mu = stats->mean[c];
            double sd = stats->stdev[c];
            for (double& x : stack.channels[c].v) x = (x - mu) / sd;
        }
    }
    return stack;
}

} // namespace chirpfuse
