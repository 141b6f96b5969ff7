#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chirpfuse/archive.hpp"
#include "chirpfuse/audio.hpp"
#include "chirpfuse/config.hpp"
#include "chirpfuse/embedding.hpp"
#include "chirpfuse/error.hpp"
#include "chirpfuse/metrics.hpp"
#include "chirpfuse/model.hpp"
#include "chirpfuse/spectral.hpp"
#include "chirpfuse/synth.hpp"
#include "chirpfuse/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace chirpfuse;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> manifest;
    std::optional<std::string> features;
    std::optional<std::string> embeddings;
};

void add_common(CLI::App* cmd, CommonFlags* flags, bool with_paths = true) {
    cmd->add_option("--config", flags->config_path, "JSON run configuration");
    cmd->add_option("--seed", flags->seed, "override the run seed");
    cmd->add_option("--out", flags->out_dir, "output directory");
    if (with_paths) {
        cmd->add_option("--manifest", flags->manifest, "dataset manifest CSV");
        cmd->add_option("--features", flags->features, "feature archive path");
        cmd->add_option("--embeddings", flags->embeddings, "embedding archive path");
    }
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg = load_run_config(flags.config_path);
    if (flags.seed) {
        cfg.train.seed = *flags.seed;
        cfg.synth.seed = *flags.seed;
    }
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.manifest) cfg.manifest_path = *flags.manifest;
    if (flags.features) cfg.features_path = *flags.features;
    if (flags.embeddings) cfg.embeddings_path = *flags.embeddings;
    return cfg;
}

fs::path ensure_out_dir(const RunConfig& cfg) {
    fs::path dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

json metrics_to_json(const Metrics& m) {
    return json{{"accuracy", m.accuracy},
                {"precision_macro", m.precision_macro},
                {"recall_macro", m.recall_macro},
                {"f1_macro", m.f1_macro},
                {"params", m.params},
                {"confusion", m.confusion}};
}

// The pseudo provider is only instantiated when the semantic branch is live;
// pure spectral runs never touch the audio a second time.
std::unique_ptr<EmbeddingProvider> make_provider(const RunConfig& cfg, BranchMode branch) {
    if (branch == BranchMode::spectral) return nullptr;
    if (cfg.provider.kind == "file") {
        if (cfg.embeddings_path.empty())
            throw ConfigError("provider.kind is 'file' but no embeddings path is set");
        return std::make_unique<FileEmbeddingProvider>(cfg.embeddings_path, cfg.provider.d_emb);
    }
    return std::make_unique<PseudoEmbeddingProvider>(cfg.provider.seed, cfg.provider.d_emb, cfg.spectral);
}

Dataset load_dataset(const RunConfig& cfg, const Manifest& manifest, EmbeddingProvider* provider) {
    if (cfg.features_path.empty()) throw ConfigError("no feature archive path configured");
    StackArchive archive = read_stack_archive(cfg.features_path);
    return build_dataset(manifest, archive, provider, cfg.spectral);
}

int cmd_synth(const CommonFlags& flags) {
    RunConfig cfg = resolve_config(flags);
    fs::path out = ensure_out_dir(cfg);
    std::string manifest = generate_dataset(cfg.synth, out.string());
    std::printf("wrote %zu clips across %zu classes; manifest at %s\n",
                cfg.synth.n_classes * cfg.synth.clips_per_class, cfg.synth.n_classes,
                manifest.c_str());
    return 0;
}

int cmd_extract(const CommonFlags& flags) {
    RunConfig cfg = resolve_config(flags);
    if (cfg.manifest_path.empty()) throw ConfigError("extract requires a manifest path");
    Manifest manifest = load_manifest(cfg.manifest_path);
    fs::path out = ensure_out_dir(cfg);
    fs::path features_path = cfg.features_path.empty() ? out / "features.sslf" : fs::path(cfg.features_path);

    StackArchive archive;
    archive.height = cfg.spectral.target_height;
    archive.width = cfg.spectral.target_width;
    std::vector<AudioClip> windows;
    windows.reserve(manifest.records.size());
    for (const ManifestRecord& rec : manifest.records) {
        try {
            AudioClip clip = load_wav(rec.path);
            std::vector<AudioClip> segments = segment(clip, cfg.spectral.clip_seconds, cfg.spectral.clip_hop_seconds);
            segments[0].source_id = rec.id;
            windows.push_back(std::move(segments[0]));
        } catch (const Error& e) {
            throw DataError("record '" + rec.id + "': " + e.what());
        }
    }

    // Pass one: raw stacks. Normalization stats come from the train split only,
    // then apply to every split.
    std::vector<SpectralStack> stacks;
    stacks.reserve(windows.size());
    for (const AudioClip& win : windows) stacks.push_back(build_spectral_stack(win, cfg.spectral));

    ChannelStats stats;
    const std::size_t cells = static_cast<std::size_t>(archive.height) * archive.width;
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < stacks.size(); ++i) {
            if (manifest.records[i].split != "train") continue;
            for (double v : stacks[i].channels[c].v) sum += v;
            count += cells;
        }
        if (count == 0) throw DataError("manifest has no train records to normalize against");
        const double mean = sum / static_cast<double>(count);
        double var = 0.0;
        for (std::size_t i = 0; i < stacks.size(); ++i) {
            if (manifest.records[i].split != "train") continue;
            for (double v : stacks[i].channels[c].v) var += (v - mean) * (v - mean);
        }
        stats.mean[c] = mean;
        stats.stdev[c] = std::max(std::sqrt(var / static_cast<double>(count)), 1e-12);
    }
    archive.stats = stats;

    archive.records.reserve(stacks.size());
    for (std::size_t i = 0; i < stacks.size(); ++i) {
        StackRecord rec;
        rec.id = manifest.records[i].id;
        rec.label = static_cast<std::uint32_t>(manifest.records[i].label_index);
        rec.data.reserve(3 * cells);
        for (int c = 0; c < 3; ++c)
            for (double v : stacks[i].channels[c].v)
                rec.data.push_back(static_cast<float>((v - stats.mean[c]) / stats.stdev[c]));
        archive.records.push_back(std::move(rec));
    }
    write_stack_archive(features_path.string(), archive);
    std::printf("wrote %zu feature stacks to %s\n", archive.records.size(), features_path.string().c_str());

    if (!cfg.embeddings_path.empty() && cfg.provider.kind == "pseudo") {
        PseudoEmbeddingProvider provider(cfg.provider.seed, cfg.provider.d_emb, cfg.spectral);
        EmbeddingArchive emb;
        emb.d_emb = static_cast<std::uint32_t>(provider.dimension());
        for (const AudioClip& win : windows) {
            std::vector<double> vec = provider.provide(win);
            emb.records.push_back({win.source_id, std::vector<float>(vec.begin(), vec.end())});
        }
        write_embedding_archive(cfg.embeddings_path, emb);
        std::printf("wrote %zu embeddings to %s\n", emb.records.size(), cfg.embeddings_path.c_str());
    }
    return 0;
}

int cmd_train(const CommonFlags& flags, const std::optional<std::string>& strategy,
              const std::optional<std::string>& branch, const std::optional<int>& epochs,
              const std::optional<int>& samples_per_class) {
    RunConfig cfg = resolve_config(flags);
    if (strategy) cfg.strategy = *strategy;
    if (branch) cfg.branch = *branch;
    if (epochs) cfg.train.epochs = *epochs;
    if (samples_per_class) {
        if (*samples_per_class <= 0) throw ConfigError("--samples-per-class must be positive");
        cfg.train.samples_per_class = static_cast<std::size_t>(*samples_per_class);
    }
    if (cfg.manifest_path.empty()) throw ConfigError("train requires a manifest path");
    cfg.train.validate();
    // Reject bad names before any file access so misconfiguration wins.
    fusion_strategy_from_name(cfg.strategy);
    branch_mode_from_name(cfg.branch);

    Manifest manifest = load_manifest(cfg.manifest_path);
    ModelConfig mc = cfg.model_config(manifest.vocabulary.size());
    auto provider = make_provider(cfg, mc.branch);
    Dataset data = load_dataset(cfg, manifest, provider.get());
    fs::path out = ensure_out_dir(cfg);

    Model model(mc);
    TrainResult result = train_model(model, data, cfg.train);
    for (const EpochStats& row : result.history)
        std::printf("epoch %zu train_loss=%.6f val_accuracy=%.4f\n", row.epoch, row.train_loss,
                    row.val_accuracy);

    json hist = json::array();
    for (const EpochStats& row : result.history)
        hist.push_back({{"epoch", row.epoch}, {"train_loss", row.train_loss}, {"val_accuracy", row.val_accuracy}});
    write_text_file(out / "history.json", hist.dump(2) + "\n");
    save_bundle((out / "bundle.cfb").string(), model, cfg.spectral, data.stats, data.vocabulary,
                cfg.train.seed);
    std::printf("saved bundle to %s\n", (out / "bundle.cfb").string().c_str());
    return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& bundle_path, const std::string& split) {
    RunConfig cfg = resolve_config(flags);
    if (cfg.manifest_path.empty()) throw ConfigError("eval requires a manifest path");
    ModelBundle bundle = load_bundle(bundle_path);
    cfg.spectral = bundle.spectral;

    Manifest manifest = load_manifest(cfg.manifest_path);
    if (manifest.vocabulary != bundle.vocabulary)
        throw DataError("manifest label vocabulary does not match the bundle");
    auto provider = make_provider(cfg, bundle.net->config().branch);
    Dataset data = load_dataset(cfg, manifest, provider.get());
    fs::path out = ensure_out_dir(cfg);

    Metrics m = evaluate_model(*bundle.net, data.split(split));
    write_text_file(out / "metrics.json", metrics_to_json(m).dump(2) + "\n");
    std::printf("acc=%.4f prc=%.4f rec=%.4f f1=%.4f params=%zu\n", m.accuracy, m.precision_macro,
                m.recall_macro, m.f1_macro, m.params);
    return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::vector<int>& budget_flags) {
    RunConfig cfg = resolve_config(flags);
    if (cfg.manifest_path.empty()) throw ConfigError("sweep requires a manifest path");
    std::vector<std::size_t> budgets;
    if (!budget_flags.empty()) {
        for (int b : budget_flags) {
            if (b <= 0) throw ConfigError("sweep budgets must be positive");
            budgets.push_back(static_cast<std::size_t>(b));
        }
    } else {
        budgets = cfg.sweep_budgets;
    }
    if (budgets.empty()) throw ConfigError("sweep requires at least one label budget");

    Manifest manifest = load_manifest(cfg.manifest_path);
    ModelConfig mc = cfg.model_config(manifest.vocabulary.size());
    mc.branch = BranchMode::both;
    auto provider = make_provider(cfg, mc.branch);
    Dataset data = load_dataset(cfg, manifest, provider.get());
    fs::path out = ensure_out_dir(cfg);

    const std::vector<FusionStrategy> strategies = {FusionStrategy::fixed, FusionStrategy::shared,
                                                    FusionStrategy::sampling};
    std::vector<SweepRow> rows = label_budget_sweep(data, mc, cfg.train, budgets, strategies);

    json doc = json::array();
    for (const SweepRow& row : rows) {
        doc.push_back({{"strategy", row.strategy},
                       {"budget", row.budget},
                       {"metrics", metrics_to_json(row.metrics)}});
        std::printf("strategy=%s budget=%zu acc=%.4f f1=%.4f\n", row.strategy.c_str(), row.budget,
                    row.metrics.accuracy, row.metrics.f1_macro);
    }
    write_text_file(out / "sweep.json", doc.dump(2) + "\n");
    return 0;
}

int cmd_dump_embeddings(const CommonFlags& flags, const std::string& bundle_path,
                        const std::string& split, std::string out_file) {
    RunConfig cfg = resolve_config(flags);
    if (cfg.manifest_path.empty()) throw ConfigError("dump-embeddings requires a manifest path");
    ModelBundle bundle = load_bundle(bundle_path);
    cfg.spectral = bundle.spectral;

    Manifest manifest = load_manifest(cfg.manifest_path);
    if (manifest.vocabulary != bundle.vocabulary)
        throw DataError("manifest label vocabulary does not match the bundle");
    auto provider = make_provider(cfg, bundle.net->config().branch);
    Dataset data = load_dataset(cfg, manifest, provider.get());
    fs::path out = ensure_out_dir(cfg);
    if (out_file.empty()) out_file = (out / ("fused_" + split + ".ssle")).string();

    const std::vector<Example>& examples = data.split(split);
    if (examples.empty()) throw DataError("split '" + split + "' is empty");

    EmbeddingArchive emb;
    emb.d_emb = static_cast<std::uint32_t>(bundle.net->config().fused_width());
    emb.labels.emplace();
    for (const Example& ex : examples) {
        TensorPtr h = bundle.net->fused_feature(nullptr, ex.stack, ex.embedding, nullptr);
        emb.records.push_back({ex.id, std::vector<float>(h->value.begin(), h->value.end())});
        emb.labels->push_back(static_cast<std::uint32_t>(ex.label));
    }
    write_embedding_archive(out_file, emb);
    std::printf("wrote %zu fused embeddings of width %u to %s\n", emb.records.size(), emb.d_emb,
                out_file.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"chirpfuse: dual-branch bird sound classification"};
    app.require_subcommand(1);

    CommonFlags synth_flags;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic labelled WAV corpus");
    add_common(synth_cmd, &synth_flags, false);

    CommonFlags extract_flags;
    CLI::App* extract_cmd = app.add_subcommand("extract", "build feature stacks from a manifest");
    add_common(extract_cmd, &extract_flags);

    CommonFlags train_flags;
    std::optional<std::string> train_strategy, train_branch;
    std::optional<int> train_epochs, train_spc;
    CLI::App* train_cmd = app.add_subcommand("train", "train a classifier and save a bundle");
    add_common(train_cmd, &train_flags);
    train_cmd->add_option("--strategy", train_strategy, "fusion strategy: fixed, shared, sampling");
    train_cmd->add_option("--branch", train_branch, "branch mode: both, spectral, semantic");
    train_cmd->add_option("--epochs", train_epochs, "training epochs");
    train_cmd->add_option("--samples-per-class", train_spc, "cap labelled train examples per class");

    CommonFlags eval_flags;
    std::string eval_bundle;
    std::string eval_split = "test";
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved bundle on a split");
    add_common(eval_cmd, &eval_flags);
    eval_cmd->add_option("--bundle", eval_bundle, "trained bundle path")->required();
    eval_cmd->add_option("--split", eval_split, "split to evaluate (train, val, test)");

    CommonFlags sweep_flags;
    std::vector<int> sweep_budgets;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "label-budget sweep over all fusion strategies");
    add_common(sweep_cmd, &sweep_flags);
    sweep_cmd->add_option("--budgets", sweep_budgets, "ascending per-class label budgets")
        ->delimiter(',');

    CommonFlags dump_flags;
    std::string dump_bundle, dump_out_file;
    std::string dump_split = "test";
    CLI::App* dump_cmd = app.add_subcommand("dump-embeddings", "export fused features for a split");
    add_common(dump_cmd, &dump_flags);
    dump_cmd->add_option("--bundle", dump_bundle, "trained bundle path")->required();
    dump_cmd->add_option("--split", dump_split, "split to export (train, val, test)");
    dump_cmd->add_option("--out-file", dump_out_file, "embedding archive path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*synth_cmd) return cmd_synth(synth_flags);
        if (*extract_cmd) return cmd_extract(extract_flags);
        if (*train_cmd) return cmd_train(train_flags, train_strategy, train_branch, train_epochs, train_spc);
        if (*eval_cmd) return cmd_eval(eval_flags, eval_bundle, eval_split);
        if (*sweep_cmd) return cmd_sweep(sweep_flags, sweep_budgets);
        if (*dump_cmd) return cmd_dump_embeddings(dump_flags, dump_bundle, dump_split, dump_out_file);
        std::fprintf(stderr, "error: no subcommand selected\n");
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    }
}
