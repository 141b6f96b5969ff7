#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "chirpfuse/archive.hpp"
#include "chirpfuse/audio.hpp"
#include "chirpfuse/error.hpp"
#include "chirpfuse/rng.hpp"
#include "chirpfuse/spectral.hpp"

using namespace chirpfuse;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
    fs::path dir = fs::temp_directory_path() / "chirpfuse_dsp_test";
    fs::create_directories(dir);
    return dir;
}

std::vector<double> noise(Rng& rng, std::size_t n, double amp = 0.5) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-amp, amp);
    return v;
}

// Textbook quadratic-time DFT, written independently of the fast transform.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * M_PI * double(k) * double(i) / double(n);
            acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

} // namespace

TEST_CASE("fft of an all-ones frame concentrates in the DC bin") {
    auto bins = fft_real({1.0, 1.0, 1.0, 1.0});
    REQUIRE_EQ(bins.size(), 3);
    CHECK_EQ(std::abs(bins[0]), doctest::Approx(4.0).epsilon(1e-12));
    CHECK_EQ(std::abs(bins[1]), doctest::Approx(0.0).epsilon(1e-12));
    CHECK_EQ(std::abs(bins[2]), doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("a bin-centred cosine lands in its bin with magnitude n over two") {
    const std::size_t n = 64, k = 4;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * M_PI * double(k) * double(i) / double(n));
    auto bins = fft_real(x);
    CHECK_EQ(std::abs(bins[k]), doctest::Approx(32.0).epsilon(1e-12));
    for (std::size_t b = 0; b < bins.size(); ++b)
        if (b != k) CHECK_LT(std::abs(bins[b]), 1e-9);
}

TEST_CASE("fft matches a naive quadratic DFT across sizes") {
    Rng rng(101);
    for (std::size_t n : {8, 16, 32, 64, 128, 256, 512}) {
        auto x = noise(rng, n, 1.0);
        double norm = 0.0;
        for (double v : x) norm += v * v;
        norm = std::sqrt(norm);

        auto fast = fft_real(x);
        auto slow = naive_dft(x);
        double worst = 0.0;
        for (std::size_t b = 0; b < fast.size(); ++b) worst = std::max(worst, std::abs(fast[b] - slow[b]));
        CHECK_LT(worst, 1e-9 * norm);
    }
}

TEST_CASE("windowed energy balances across domains") {
    // One-sided bins weighted 1 at DC and Nyquist, 2 elsewhere:
    // (1/n) * sum_b weight(b) |X_b|^2 == sum_i (w_i x_i)^2.
    Rng rng(7);
    const std::size_t n = 256;
    auto x = noise(rng, n, 1.0);
    auto w = hann_window(n);
    std::vector<double> wx(n);
    double rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wx[i] = w[i] * x[i];
        rhs += wx[i] * wx[i];
    }
    auto bins = fft_real(wx);
    double lhs = std::norm(bins[0]) + std::norm(bins[n / 2]);
    for (std::size_t b = 1; b < n / 2; ++b) lhs += 2.0 * std::norm(bins[b]);
    lhs /= double(n);
    CHECK_EQ(lhs, doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("fft rejects frames whose length is not a power of two") {
    CHECK_THROWS_AS(fft_real(std::vector<double>(6, 0.0)), ConfigError);
    CHECK_THROWS_AS(fft_real({}), ConfigError);
}

TEST_CASE("hann window is periodic and peaks at the midpoint") {
    auto w = hann_window(8);
    REQUIRE_EQ(w.size(), 8);
    CHECK_EQ(w[0], doctest::Approx(0.0));
    CHECK_EQ(w[4], doctest::Approx(1.0));
    // Periodic flavour: w[k] + w[k + n/2] == 1 for all k.
    for (int k = 0; k < 4; ++k) CHECK_EQ(w[k] + w[k + 4], doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mel scale hits its pinned point and inverts") {
    CHECK_EQ(hz_to_mel(0.0), doctest::Approx(0.0));
    CHECK_EQ(hz_to_mel(700.0), doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
    CHECK_EQ(hz_to_mel(700.0), doctest::Approx(781.1728).epsilon(1e-7));
    for (double hz : {10.0, 150.0, 1234.5, 8000.0, 11025.0})
        CHECK_EQ(mel_to_hz(hz_to_mel(hz)), doctest::Approx(hz).epsilon(1e-10));
}

TEST_CASE("mel filter rows peak at one and tile the band contiguously") {
    SpectralConfig cfg;
    FilterBank fb = mel_filterbank(cfg, cfg.sample_rate);
    REQUIRE_EQ(fb.weights.rows, cfg.n_mels);
    REQUIRE_EQ(fb.weights.cols, cfg.n_fft / 2 + 1);
    REQUIRE_EQ(fb.center_frequencies_hz.size(), cfg.n_mels);

    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
        double row_max = 0.0;
        std::size_t support = 0;
        for (std::size_t b = 0; b <= cfg.n_fft / 2; ++b) {
            const double v = fb.weights.at(m, b);
            CHECK_GE(v, 0.0);
            if (v > 0.0) ++support;
            row_max = std::max(row_max, v);
        }
        CHECK_EQ(row_max, 1.0); // exact rescale
        CHECK_GT(support, 0);

        // Support is a contiguous run of bins.
        bool inside = false, ended = false;
        for (std::size_t b = 0; b <= cfg.n_fft / 2; ++b) {
            const bool on = fb.weights.at(m, b) > 0.0;
            if (on) {
                CHECK_FALSE(ended);
                inside = true;
            } else if (inside) {
                ended = true;
            }
        }
        if (m > 0) CHECK_GT(fb.center_frequencies_hz[m], fb.center_frequencies_hz[m - 1]);
    }

    // Neighbouring filters overlap, so the interior of the band is covered.
    const double bin_hz = double(cfg.sample_rate) / double(cfg.n_fft);
    for (std::size_t b = 0; b <= cfg.n_fft / 2; ++b) {
        const double f = double(b) * bin_hz;
        if (f <= fb.center_frequencies_hz.front() || f >= fb.center_frequencies_hz.back()) continue;
        double col_sum = 0.0;
        for (std::size_t m = 0; m < cfg.n_mels; ++m) col_sum += fb.weights.at(m, b);
        CHECK_GT(col_sum, 0.0);
    }
}

TEST_CASE("too many filters for the grid is a configuration error") {
    SpectralConfig cfg;
    cfg.n_fft = 64;
    cfg.n_mels = 64; // far more filters than bins with support
    CHECK_THROWS_AS(mel_filterbank(cfg, cfg.sample_rate), ConfigError);
}

TEST_CASE("silence maps to the log floor everywhere") {
    SpectralConfig cfg;
    std::vector<double> zeros(22050, 0.0);
    Grid g = mel_spectrogram(zeros, cfg);
    REQUIRE_EQ(g.rows, cfg.n_mels);
    for (double v : g.v) CHECK_EQ(v, doctest::Approx(std::log(1e-10)).epsilon(1e-12));
}

TEST_CASE("amplitude scaling shifts the log-mel grid by two log c") {
    Rng rng(8);
    SpectralConfig cfg;
    auto x = noise(rng, 22050, 0.3);
    std::vector<double> x3(x);
    for (double& v : x3) v *= 3.0;
    Grid a = mel_spectrogram(x, cfg);
    Grid b = mel_spectrogram(x3, cfg);
    for (std::size_t i = 0; i < a.v.size(); ++i)
        CHECK_EQ(b.v[i] - a.v[i], doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("cepstra ignore amplitude except in the first coefficient") {
    Rng rng(9);
    SpectralConfig cfg;
    auto x = noise(rng, 22050, 0.3);
    std::vector<double> x2(x);
    for (double& v : x2) v *= 2.0;
    Grid a = mfcc(x, cfg);
    Grid b = mfcc(x2, cfg);
    REQUIRE_EQ(a.rows, cfg.n_mfcc);
    for (std::size_t r = 1; r < a.rows; ++r)
        for (std::size_t c = 0; c < a.cols; ++c)
            CHECK_EQ(b.at(r, c), doctest::Approx(a.at(r, c)).epsilon(1e-9));
    // Row zero absorbs the shift: sqrt(n_mels) * 2 log 2 per column.
    const double shift = std::sqrt(double(cfg.n_mels)) * 2.0 * std::log(2.0);
    for (std::size_t c = 0; c < a.cols; ++c)
        CHECK_EQ(b.at(0, c) - a.at(0, c), doctest::Approx(shift).epsilon(1e-9));
}

TEST_CASE("cepstra of silence pin the orthonormal constant response") {
    SpectralConfig cfg;
    std::vector<double> zeros(22050, 0.0);
    Grid g = mfcc(zeros, cfg);
    // Constant log-floor column: coefficient zero is v * sqrt(n_mels), the
    // rest vanish.
    const double expect = std::log(1e-10) * std::sqrt(double(cfg.n_mels));
    for (std::size_t c = 0; c < g.cols; ++c) {
        CHECK_EQ(g.at(0, c), doctest::Approx(expect).epsilon(1e-12));
        for (std::size_t r = 1; r < g.rows; ++r) CHECK_EQ(g.at(r, c), doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("full-size cepstra preserve column energy") {
    // With n_mfcc == n_mels the transform is orthonormal, so each column
    // keeps its Euclidean norm.
    Rng rng(10);
    SpectralConfig cfg;
    cfg.n_mfcc = cfg.n_mels;
    auto x = noise(rng, 22050, 0.4);
    Grid logmel = mel_spectrogram(x, cfg);
    Grid ceps = mfcc(x, cfg);
    REQUIRE_EQ(ceps.rows, cfg.n_mels);
    REQUIRE_EQ(ceps.cols, logmel.cols);
    for (std::size_t c = 0; c < logmel.cols; ++c) {
        double num = 0.0, den = 0.0;
        for (std::size_t r = 0; r < cfg.n_mels; ++r) {
            num += ceps.at(r, c) * ceps.at(r, c);
            den += logmel.at(r, c) * logmel.at(r, c);
        }
        CHECK_EQ(num, doctest::Approx(den).epsilon(1e-12));
    }
}

TEST_CASE("short clips are rejected by the analysis front end") {
    SpectralConfig cfg;
    std::vector<double> tiny(cfg.n_fft - 1, 0.1);
    CHECK_THROWS_AS(stft_magnitude(tiny, cfg), ConfigError);
}

TEST_CASE("bilinear resize matches the pinned example and stays in range") {
    Grid in(2, 2);
    in.at(0, 0) = 0.0;
    in.at(0, 1) = 1.0;
    in.at(1, 0) = 0.0;
    in.at(1, 1) = 1.0;
    Grid out = resize_bilinear(in, 2, 3);
    CHECK_EQ(out.at(0, 0), doctest::Approx(0.0));
    CHECK_EQ(out.at(0, 1), doctest::Approx(0.5));
    CHECK_EQ(out.at(0, 2), doctest::Approx(1.0));
    CHECK_EQ(out.at(1, 1), doctest::Approx(0.5));

    Grid single(1, 1);
    single.at(0, 0) = 7.5;
    Grid rep = resize_bilinear(single, 3, 4);
    for (double v : rep.v) CHECK_EQ(v, doctest::Approx(7.5));

    Rng rng(11);
    Grid rnd(5, 7);
    for (double& v : rnd.v) v = rng.uniform(-2.0, 2.0);
    const double lo = *std::min_element(rnd.v.begin(), rnd.v.end());
    const double hi = *std::max_element(rnd.v.begin(), rnd.v.end());
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{64, 64}, {3, 2}, {13, 29}}) {
        Grid r = resize_bilinear(rnd, h, w);
        REQUIRE_EQ(r.rows, h);
        for (double v : r.v) {
            CHECK_GE(v, lo - 1e-12);
            CHECK_LE(v, hi + 1e-12);
        }
    }
}

TEST_CASE("stacks carry three standardized channels at the target size") {
    Rng rng(12);
    AudioClip clip;
    clip.sample_rate = 22050;
    clip.source_id = "probe";
    clip.samples = noise(rng, 3 * 22050, 0.4);
    SpectralConfig cfg;

    SpectralStack raw = build_spectral_stack(clip, cfg);
    for (const Grid& ch : raw.channels) {
        CHECK_EQ(ch.rows, cfg.target_height);
        CHECK_EQ(ch.cols, cfg.target_width);
    }
    CHECK_EQ(raw.source_id, "probe");

    ChannelStats stats;
    stats.mean = {1.0, 2.0, 3.0};
    stats.stdev = {2.0, 4.0, 8.0};
    SpectralStack std_stack = build_spectral_stack(clip, cfg, &stats);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < raw.channels[c].v.size(); ++i)
            CHECK_EQ(std_stack.channels[c].v[i],
                     doctest::Approx((raw.channels[c].v[i] - stats.mean[c]) / stats.stdev[c]));

    AudioClip wrong = clip;
    wrong.sample_rate = 16000;
    CHECK_THROWS_AS(build_spectral_stack(wrong, cfg), DataError);
}

TEST_CASE("segmentation counts match the pinned durations") {
    auto make = [](double seconds) {
        AudioClip c;
        c.sample_rate = 22050;
        c.source_id = "clip";
        c.samples.assign(std::size_t(seconds * 22050.0), 0.25);
        return c;
    };
    CHECK_EQ(segment(make(10.0), 3.0, 3.0).size(), 3);
    CHECK_EQ(segment(make(5.0), 3.0, 3.0).size(), 2);
    CHECK_EQ(segment(make(2.0), 3.0, 3.0).size(), 1);

    auto segs = segment(make(5.0), 3.0, 3.0);
    CHECK_EQ(segs[0].source_id, "clip#0");
    CHECK_EQ(segs[1].source_id, "clip#1");
    // All segments are exactly one window long; the tail is zero padded.
    for (const auto& s : segs) CHECK_EQ(s.samples.size(), std::size_t(3.0 * 22050.0));
    CHECK_EQ(segs[1].samples.back(), 0.0);

    // A short clip yields one zero-padded window.
    auto one = segment(make(2.0), 3.0, 3.0);
    CHECK_EQ(one[0].samples.size(), std::size_t(3.0 * 22050.0));
}

TEST_CASE("wav io round trips through 16-bit quantization") {
    Rng rng(13);
    fs::path path = test_dir() / "roundtrip.wav";
    std::vector<double> samples = noise(rng, 4000, 0.8);
    write_wav_pcm16(path.string(), samples, 22050);

    AudioClip clip = load_wav(path.string());
    CHECK_EQ(clip.sample_rate, 22050);
    REQUIRE_EQ(clip.samples.size(), samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        CHECK_LT(std::abs(clip.samples[i] - samples[i]), 1.0 / 32768.0 + 1e-12);

    // Writing the decoded samples again reproduces the file bit for bit.
    fs::path again = test_dir() / "roundtrip2.wav";
    write_wav_pcm16(again.string(), clip.samples, 22050);
    std::ifstream f1(path, std::ios::binary), f2(again, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), {});
    std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
}

TEST_CASE("pcm16 extremes decode to their exact rational values") {
    fs::path path = test_dir() / "extremes.wav";
    // +1 clamps to 32767; -1 maps to -32767 on write, so synthesize a file
    // holding the true extremes by hand.
    std::ofstream out(path, std::ios::binary);
    auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
    out.write("RIFF", 4);
    u32(36 + 4);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    u32(16);
    u16(1); // PCM
    u16(1); // mono
    u32(8000);
    u32(8000 * 2);
    u16(2);
    u16(16);
    out.write("data", 4);
    u32(4);
    u16(0x7FFF); // +32767
    u16(0x8000); // -32768
    out.close();

    AudioClip clip = load_wav(path.string());
    REQUIRE_EQ(clip.samples.size(), 2);
    CHECK_EQ(clip.samples[0], 0.999969482421875);
    CHECK_EQ(clip.samples[1], -1.0);
}

TEST_CASE("stereo input averages to mono") {
    fs::path path = test_dir() / "stereo.wav";
    std::ofstream out(path, std::ios::binary);
    auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
    out.write("RIFF", 4);
    u32(36 + 8);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    u32(16);
    u16(1);
    u16(2); // stereo
    u32(8000);
    u32(8000 * 4);
    u16(4);
    u16(16);
    out.write("data", 4);
    u32(8);
    u16(16384);
    u16(0); // frame 0: L=0.5, R=0
    u16(0x8000);
    u16(0x8000); // frame 1: both -1
    out.close();

    AudioClip clip = load_wav(path.string());
    REQUIRE_EQ(clip.samples.size(), 2);
    CHECK_EQ(clip.samples[0], doctest::Approx(0.25));
    CHECK_EQ(clip.samples[1], doctest::Approx(-1.0));
}

TEST_CASE("malformed wav files raise data errors") {
    fs::path path = test_dir() / "garbage.wav";
    std::ofstream(path, std::ios::binary) << "not a wav at all";
    CHECK_THROWS_AS(load_wav(path.string()), DataError);
    CHECK_THROWS_AS(load_wav((test_dir() / "missing.wav").string()), DataError);
}

TEST_CASE("feature archives round trip bitwise with their sidecar") {
    fs::path path = test_dir() / "stacks.sslf";
    StackArchive a;
    a.height = 4;
    a.width = 3;
    a.stats.mean = {0.5, -1.0, 2.0};
    a.stats.stdev = {1.5, 2.5, 3.5};
    Rng rng(14);
    for (int i = 0; i < 3; ++i) {
        StackRecord rec;
        rec.id = "clip_" + std::to_string(i);
        rec.label = std::uint32_t(i % 2);
        for (int j = 0; j < 3 * 4 * 3; ++j) rec.data.push_back(float(rng.uniform(-1, 1)));
        a.records.push_back(rec);
    }
    write_stack_archive(path.string(), a);

    StackArchive b = read_stack_archive(path.string());
    CHECK_EQ(b.height, 4);
    CHECK_EQ(b.width, 3);
    CHECK_EQ(b.stats.mean[2], doctest::Approx(2.0));
    REQUIRE_EQ(b.records.size(), 3);
    CHECK_EQ(b.records[1].id, "clip_1");
    CHECK(b.records[2].data == a.records[2].data);

    fs::path path2 = test_dir() / "stacks2.sslf";
    write_stack_archive(path2.string(), b);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), {});
    std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);

    // The sidecar is required reading.
    fs::remove(fs::path(path2.string() + ".norm.json"));
    CHECK_THROWS_AS(read_stack_archive(path2.string()), DataError);
}

TEST_CASE("embedding archives round trip with and without labels") {
    fs::path path = test_dir() / "emb.ssle";
    EmbeddingArchive a;
    a.d_emb = 5;
    a.records.push_back({"x", {1.f, 2.f, 3.f, 4.f, 5.f}});
    a.records.push_back({"y", {-1.f, 0.f, 1.f, 2.f, 3.f}});
    write_embedding_archive(path.string(), a);
    EmbeddingArchive b = read_embedding_archive(path.string());
    CHECK_EQ(b.d_emb, 5);
    CHECK_FALSE(b.labels.has_value());
    CHECK(b.records[1].vec == a.records[1].vec);

    a.labels = std::vector<std::uint32_t>{3, 9};
    write_embedding_archive(path.string(), a);
    EmbeddingArchive c = read_embedding_archive(path.string());
    REQUIRE(c.labels.has_value());
    CHECK_EQ((*c.labels)[1], 9);

    // Truncation is detected.
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    CHECK_THROWS_AS(read_embedding_archive(path.string()), DataError);
}
