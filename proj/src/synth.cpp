#include "chirpfuse/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "chirpfuse/audio.hpp"
#include "chirpfuse/error.hpp"
#include "chirpfuse/rng.hpp"

namespace chirpfuse {

void SynthSpec::validate() const {
    if (n_classes < 2) throw ConfigError("synth.n_classes must be at least 2");
    if (clips_per_class < 5)
        throw ConfigError("synth.clips_per_class must be at least 5 so every split "
                          "is non-empty");
    if (duration_seconds <= 0.0) throw ConfigError("synth.duration must be positive");
    if (snr <= 0.0) throw ConfigError("synth.snr must be positive");
    if (sample_rate == 0) throw ConfigError("synth.sample_rate must be positive");
    if (!archetypes.empty() && archetypes.size() != n_classes)
        throw ConfigError("synth.archetypes must be empty or have one entry per class");

    std::vector<SynthClass> all;
    for (std::size_t c = 0; c < n_classes; ++c) all.push_back(archetype(c));
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if (all[i] == all[j])
                throw ConfigError("synth archetypes for classes " + std::to_string(i) +
                                  " and " + std::to_string(j) + " coincide");
    double nyquist = sample_rate / 2.0;
    for (std::size_t c = 0; c < all.size(); ++c) {
        double f_end = all[c].base_freq_hz + all[c].chirp_hz_per_s * duration_seconds;
        if (all[c].base_freq_hz <= 0.0 || all[c].base_freq_hz >= nyquist ||
            f_end <= 0.0 || f_end >= nyquist)
            throw ConfigError("synth archetype " + std::to_string(c) +
                              " sweeps outside (0, nyquist)");
    }
}

SynthClass SynthSpec::archetype(std::size_t cls) const {
    if (!archetypes.empty()) return archetypes[cls];
    SynthClass a;
    a.base_freq_hz = 400.0 + 700.0 * static_cast<double>(cls);
    // Slopes stay inside (0, nyquist) for the default three-second clips.
    a.chirp_hz_per_s = (static_cast<double>(cls % 3) - 1.0) * 100.0;
    a.am_rate_hz = 1.5 + 1.7 * static_cast<double>(cls % 4);
    return a;
}

namespace {

std::vector<double> render_clip(const SynthSpec& spec, const SynthClass& cls,
                                Rng& rng) {
    auto n = static_cast<std::size_t>(
        std::lrint(spec.duration_seconds * spec.sample_rate));
    double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double am_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double freq = cls.base_freq_hz * (1.0 + rng.uniform(-0.01, 0.01));
    double amp = 0.35 * (1.0 + rng.uniform(-0.15, 0.15));

    std::vector<double> s(n);
    double power = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / spec.sample_rate;
        double env = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * cls.am_rate_hz * t +
                                            am_phase);
        double arg = 2.0 * std::numbers::pi *
                         (freq * t + 0.5 * cls.chirp_hz_per_s * t * t) +
                     phase;
        s[i] = amp * env * std::sin(arg);
        power += s[i] * s[i];
    }
    power /= static_cast<double>(n);

    double sigma = std::sqrt(power / spec.snr);
    for (double& x : s) {
        x += sigma * rng.next_gauss();
        x = std::min(1.0, std::max(-1.0, x));
    }
    return s;
}

} // namespace

std::string generate_dataset(const SynthSpec& spec, const std::string& out_dir) {
    spec.validate();
    namespace fs = std::filesystem;
    fs::path root(out_dir);
    fs::path wav_dir = root / "wavs";
    std::error_code ec;
    fs::create_directories(wav_dir, ec);
    if (ec) throw DataError("cannot create output directory " + wav_dir.string());

    std::size_t n = spec.clips_per_class;
    std::size_t n_train = n * 70 / 100;
    std::size_t n_val = n * 10 / 100;

    Rng root_rng(spec.seed);
    std::string manifest_path = (root / "manifest.csv").string();
    std::ofstream manifest(manifest_path, std::ios::trunc);
    if (!manifest) throw DataError("cannot write manifest: " + manifest_path);
    manifest << "id,path,label,split\n";

    char buf[64];
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        SynthClass arche = spec.archetype(c);
        std::snprintf(buf, sizeof buf, "species_%02zu", c);
        std::string label = buf;
        for (std::size_t i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof buf, "c%02zu_%04zu", c, i);
            std::string id = buf;
            Rng clip_rng = root_rng.stream("clip", c * n + i);
            std::vector<double> samples = render_clip(spec, arche, clip_rng);
            std::string rel = "wavs/" + id + ".wav";
            write_wav_pcm16((root / rel).string(), samples, spec.sample_rate);
            const char* split = i < n_train ? "train"
                                : i < n_train + n_val ? "val"
                                                      : "test";
            manifest << id << "," << rel << "," << label << "," << split << "\n";
        }
    }
    if (!manifest) throw DataError("short write to " + manifest_path);
    return manifest_path;
}

} // namespace chirpfuse
