#include "chirpfuse/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "chirpfuse/error.hpp"

namespace chirpfuse {

void ProviderConfig::validate() const {
    if (kind != "pseudo" && kind != "file")
        throw ConfigError("provider.kind must be pseudo|file, got '" + kind + "'");
    if (d_emb == 0) throw ConfigError("provider.d_emb must be positive");
}

ModelConfig RunConfig::model_config(std::size_t n_classes) const {
    ModelConfig mc;
    mc.d = d;
    mc.d_emb = provider.d_emb;
    mc.input_height = spectral.target_height;
    mc.input_width = spectral.target_width;
    mc.n_classes = n_classes;
    mc.strategy = fusion_strategy_from_name(strategy);
    mc.branch = branch_mode_from_name(branch);
    mc.tau1 = tau1;
    mc.tau2 = tau2;
    return mc;
}

namespace {

using nlohmann::json;

// Fails on any key the walker did not consume.
class Section {
public:
    Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object())
            throw ConfigError("config section '" + label() + "' must be an object");
    }

    ~Section() = default;

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + path(key) + "' has the wrong type");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown config key '" + path(it.key().c_str()) + "'");
    }

private:
    std::string label() const { return prefix_.empty() ? "<root>" : prefix_; }
    std::string path(const char* key) const {
        return prefix_.empty() ? key : prefix_ + "." + key;
    }

    const json& j_;
    std::string prefix_;
    std::set<std::string> seen_;
};

void parse_spectral(const json& j, SpectralConfig& s) {
    Section sec(j, "spectral");
    sec.get("sample_rate", s.sample_rate);
    sec.get("n_fft", s.n_fft);
    sec.get("hop_length", s.hop_length);
    sec.get("n_mels", s.n_mels);
    sec.get("n_mfcc", s.n_mfcc);
    sec.get("f_min", s.f_min);
    sec.get("f_max", s.f_max);
    sec.get("clip_seconds", s.clip_seconds);
    sec.get("clip_hop_seconds", s.clip_hop_seconds);
    sec.get("target_height", s.target_height);
    sec.get("target_width", s.target_width);
    sec.finish();
}

void parse_provider(const json& j, ProviderConfig& p) {
    Section sec(j, "provider");
    sec.get("kind", p.kind);
    sec.get("d_emb", p.d_emb);
    sec.get("seed", p.seed);
    sec.finish();
}

void parse_train(const json& j, TrainConfig& t) {
    Section sec(j, "train");
    sec.get("epochs", t.epochs);
    sec.get("batch_size", t.batch_size);
    sec.get("learning_rate", t.learning_rate);
    sec.get("beta1", t.beta1);
    sec.get("beta2", t.beta2);
    sec.get("eps", t.eps);
    sec.get("seed", t.seed);
    std::size_t k = 0;
    sec.get("samples_per_class", k);
    if (k > 0) t.samples_per_class = k;
    sec.finish();
}

void parse_fusion(const json& j, RunConfig& cfg) {
    Section sec(j, "fusion");
    sec.get("strategy", cfg.strategy);
    sec.get("d", cfg.d);
    sec.get("tau1", cfg.tau1);
    sec.get("tau2", cfg.tau2);
    sec.finish();
}

void parse_model(const json& j, RunConfig& cfg) {
    Section sec(j, "model");
    sec.get("branch", cfg.branch);
    sec.finish();
}

void parse_synth(const json& j, SynthSpec& s) {
    Section sec(j, "synth");
    sec.get("n_classes", s.n_classes);
    sec.get("clips_per_class", s.clips_per_class);
    sec.get("duration_seconds", s.duration_seconds);
    sec.get("snr", s.snr);
    sec.get("sample_rate", s.sample_rate);
    sec.get("seed", s.seed);
    if (const json* arch = sec.child("archetypes")) {
        if (!arch->is_array())
            throw ConfigError("config key 'synth.archetypes' must be an array");
        s.archetypes.clear();
        std::size_t idx = 0;
        for (const auto& item : *arch) {
            Section a(item, "synth.archetypes[" + std::to_string(idx) + "]");
            SynthClass c;
            a.get("base_freq_hz", c.base_freq_hz);
            a.get("chirp_hz_per_s", c.chirp_hz_per_s);
            a.get("am_rate_hz", c.am_rate_hz);
            a.finish();
            s.archetypes.push_back(c);
            ++idx;
        }
    }
    sec.finish();
}

void parse_paths(const json& j, RunConfig& cfg) {
    Section sec(j, "paths");
    sec.get("manifest", cfg.manifest_path);
    sec.get("features", cfg.features_path);
    sec.get("embeddings", cfg.embeddings_path);
    sec.get("out", cfg.out_dir);
    sec.finish();
}

void parse_sweep(const json& j, RunConfig& cfg) {
    Section sec(j, "sweep");
    sec.get("budgets", cfg.sweep_budgets);
    sec.finish();
}

} // namespace

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;

    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }

    Section root(j, "");
    if (const json* s = root.child("spectral")) parse_spectral(*s, cfg.spectral);
    if (const json* s = root.child("provider")) parse_provider(*s, cfg.provider);
    if (const json* s = root.child("train")) parse_train(*s, cfg.train);
    if (const json* s = root.child("fusion")) parse_fusion(*s, cfg);
    if (const json* s = root.child("model")) parse_model(*s, cfg);
    if (const json* s = root.child("synth")) parse_synth(*s, cfg.synth);
    if (const json* s = root.child("paths")) parse_paths(*s, cfg);
    if (const json* s = root.child("sweep")) parse_sweep(*s, cfg);
    root.finish();

    cfg.spectral.validate();
    cfg.provider.validate();
    cfg.train.validate();
    return cfg;
}

} // namespace chirpfuse
