#include "chirpfuse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chirpfuse/error.hpp"
#include "chirpfuse/ops.hpp"

namespace chirpfuse {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    // Plain CSV, no quoting: manifest fields never contain commas.
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

} // namespace

Manifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest: " + path);
    std::filesystem::path base = std::filesystem::path(path).parent_path();

    std::string line;
    if (!std::getline(f, line)) throw DataError("empty manifest: " + path);
    auto header = split_csv_line(trim(line));
    if (header != std::vector<std::string>{"id", "path", "label", "split"})
        throw DataError("manifest header must be exactly 'id,path,label,split': " +
                        path);

    Manifest manifest;
    std::set<std::string> ids;
    std::set<std::string> labels;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        auto fields = split_csv_line(t);
        if (fields.size() != 4)
            throw DataError("manifest line " + std::to_string(line_no) +
                            " has " + std::to_string(fields.size()) +
                            " fields, expected 4");
        ManifestRecord r;
        r.id = trim(fields[0]);
        r.path = trim(fields[1]);
        r.label = trim(fields[2]);
        r.split = trim(fields[3]);
        if (r.id.empty() || r.path.empty() || r.label.empty())
            throw DataError("manifest line " + std::to_string(line_no) +
                            " has an empty field");
        if (r.split != "train" && r.split != "val" && r.split != "test")
            throw DataError("manifest line " + std::to_string(line_no) +
                            ": split must be train|val|test, got '" + r.split + "'");
        if (!ids.insert(r.id).second)
            throw DataError("duplicate manifest id '" + r.id + "'");
        std::filesystem::path p(r.path);
        if (p.is_relative()) r.path = (base / p).string();
        labels.insert(r.label);
        manifest.records.push_back(std::move(r));
    }

    manifest.vocabulary.assign(labels.begin(), labels.end()); // sorted by std::set
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < manifest.vocabulary.size(); ++i)
        index[manifest.vocabulary[i]] = static_cast<int>(i);
    bool any_train = false, any_test = false;
    for (auto& r : manifest.records) {
        r.label_index = index[r.label];
        any_train |= r.split == "train";
        any_test |= r.split == "test";
    }
    if (!any_train || !any_test)
        throw DataError("manifest needs at least one train and one test record: " +
                        path);
    return manifest;
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("train.epochs must be positive");
    if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
    if (learning_rate <= 0.0) throw ConfigError("train.learning_rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("train.beta1/beta2 must lie in [0, 1)");
    if (eps <= 0.0) throw ConfigError("train.eps must be positive");
    if (samples_per_class && *samples_per_class == 0)
        throw ConfigError("train.samples_per_class must be at least 1");
}

Adam::Adam(std::vector<TensorPtr> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        p->ensure_grad();
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = *params_[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double g = p.grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (const auto& p : params_) p->zero_grad();
}

const std::vector<Example>& Dataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ConfigError("split must be train|val|test, got '" + name + "'");
}

Dataset build_dataset(const Manifest& manifest, const StackArchive& features,
                      EmbeddingProvider* provider, const SpectralConfig& cfg) {
    std::unordered_map<std::string, const StackRecord*> by_id;
    for (const auto& r : features.records) by_id[r.id] = &r;

    Dataset data;
    data.vocabulary = manifest.vocabulary;
    data.height = features.height;
    data.width = features.width;
    data.stats = features.stats;

    for (const auto& rec : manifest.records) {
        auto it = by_id.find(rec.id);
        if (it == by_id.end())
            throw DataError("feature archive has no record for id '" + rec.id + "'");
        const StackRecord& sr = *it->second;

        Example ex;
        ex.id = rec.id;
        ex.label = rec.label_index;
        ex.stack = Tensor::zeros({3, features.height, features.width});
        for (std::size_t i = 0; i < sr.data.size(); ++i)
            ex.stack->value[i] = static_cast<double>(sr.data[i]);

        if (provider) {
            std::vector<double> emb;
            if (auto* file = dynamic_cast<FileEmbeddingProvider*>(provider)) {
                emb = file->lookup(rec.id);
            } else {
                AudioClip clip = load_wav(rec.path);
                clip.source_id = rec.id;
                auto segments = segment(clip, cfg.clip_seconds, cfg.clip_hop_seconds);
                segments[0].source_id = rec.id;
                emb = provider->provide(segments[0]);
            }
            const std::size_t d_emb = emb.size();
            ex.embedding = Tensor::from({1, d_emb}, std::move(emb));
        }

        if (rec.split == "train") data.train.push_back(std::move(ex));
        else if (rec.split == "val") data.val.push_back(std::move(ex));
        else data.test.push_back(std::move(ex));
    }
    return data;
}

namespace {

std::vector<const Example*> truncate_per_class(const std::vector<Example>& train,
                                               std::size_t n_classes,
                                               std::optional<std::size_t> limit) {
    std::vector<const Example*> out;
    if (!limit) {
        for (const auto& ex : train) out.push_back(&ex);
        return out;
    }
    std::vector<std::size_t> taken(n_classes, 0);
    for (const auto& ex : train) {
        auto c = static_cast<std::size_t>(ex.label);
        if (taken[c] < *limit) {
            ++taken[c];
            out.push_back(&ex);
        }
    }
    for (std::size_t c = 0; c < n_classes; ++c)
        if (taken[c] == 0)
            throw DataError("class " + std::to_string(c) +
                            " has no train examples after the per-class limit");
    return out;
}

double batch_accuracy(const Model& model, const std::vector<Example>& examples) {
    if (examples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& ex : examples) {
        auto logit_row = model.logits(nullptr, ex.stack, ex.embedding, nullptr);
        auto pred = argmax_lowest(logit_row->value.data(), logit_row->cols());
        if (static_cast<int>(pred) == ex.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

} // namespace

TrainResult train_model(Model& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    std::size_t n_classes = model.config().n_classes;
    if (n_classes != data.vocabulary.size())
        throw ConfigError("model has " + std::to_string(n_classes) +
                          " classes but the dataset vocabulary has " +
                          std::to_string(data.vocabulary.size()));

    Rng root(cfg.seed);
    Rng init_rng = root; // init derives its own stream internally
    model.init(init_rng);
    Rng shuffle_rng = root.stream("shuffle");
    Rng gumbel_rng = root.stream("gumbel");

    auto train_set = truncate_per_class(data.train, n_classes, cfg.samples_per_class);
    if (train_set.empty()) throw DataError("empty train split");

    Adam opt(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    bool sampling_noise = model.config().strategy == FusionStrategy::sampling &&
                          model.config().branch == BranchMode::both;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            std::size_t b = std::min(cfg.batch_size, order.size() - done);
            Tape tape;
            std::vector<TensorPtr> rows;
            std::vector<int> labels;
            rows.reserve(b);
            labels.reserve(b);
            for (std::size_t i = 0; i < b; ++i) {
                const Example& ex = *train_set[order[done + i]];
                rows.push_back(model.logits(&tape, ex.stack, ex.embedding,
                                            sampling_noise ? &gumbel_rng : nullptr));
                labels.push_back(ex.label);
            }
            auto logits = ops::concat(&tape, 0, rows);
            auto loss = ops::cross_entropy(&tape, logits, labels);
            opt.zero_grad();
            tape.backward(loss);
            opt.step();
            loss_sum += loss->value[0] * static_cast<double>(b);
            done += b;
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.val_accuracy = batch_accuracy(model, data.val);
        result.history.push_back(stats);
    }
    return result;
}

Metrics evaluate_model(const Model& model, const std::vector<Example>& examples) {
    if (examples.empty()) throw DataError("evaluation split is empty");
    std::vector<int> truth, pred;
    truth.reserve(examples.size());
    pred.reserve(examples.size());
    for (const auto& ex : examples) {
        auto logit_row = model.logits(nullptr, ex.stack, ex.embedding, nullptr);
        truth.push_back(ex.label);
        pred.push_back(static_cast<int>(
            argmax_lowest(logit_row->value.data(), logit_row->cols())));
    }
    Metrics m = compute_metrics(truth, pred, model.config().n_classes);
    m.params = count_params(model.parameters());
    return m;
}

std::vector<SweepRow> label_budget_sweep(const Dataset& data, const ModelConfig& base,
                                         const TrainConfig& cfg,
                                         const std::vector<std::size_t>& budgets,
                                         const std::vector<FusionStrategy>& strategies) {
    if (budgets.empty()) throw ConfigError("sweep needs at least one budget");
    for (std::size_t i = 1; i < budgets.size(); ++i)
        if (budgets[i] <= budgets[i - 1])
            throw ConfigError("sweep budgets must be strictly ascending");

    std::vector<std::size_t> per_class(base.n_classes, 0);
    for (const auto& ex : data.train) ++per_class[static_cast<std::size_t>(ex.label)];
    std::size_t available = *std::min_element(per_class.begin(), per_class.end());
    if (budgets.back() > available)
        throw ConfigError("sweep budget " + std::to_string(budgets.back()) +
                          " exceeds the smallest per-class train count " +
                          std::to_string(available));

    std::vector<SweepRow> rows;
    for (FusionStrategy strategy : strategies) {
        for (std::size_t budget : budgets) {
            ModelConfig mc = base;
            mc.strategy = strategy;
            Model model(mc);

            TrainConfig run = cfg;
            run.samples_per_class = budget;
            // Fresh deterministic seed per cell.
            run.seed = Rng::mix(Rng::mix(cfg.seed ^ Rng::fnv1a(
                                             fusion_strategy_name(strategy))) ^
                                (budget + 1));
            train_model(model, data, run);

            SweepRow row;
            row.strategy = fusion_strategy_name(strategy);
            row.budget = budget;
            row.metrics = evaluate_model(model, data.test);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

namespace {

void wr_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

std::uint32_t rd_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) throw DataError("truncated bundle: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

nlohmann::json spectral_to_json(const SpectralConfig& s) {
    return {{"sample_rate", s.sample_rate},   {"n_fft", s.n_fft},
            {"hop_length", s.hop_length},     {"n_mels", s.n_mels},
            {"n_mfcc", s.n_mfcc},             {"f_min", s.f_min},
            {"f_max", s.f_max},               {"clip_seconds", s.clip_seconds},
            {"clip_hop_seconds", s.clip_hop_seconds},
            {"target_height", s.target_height},
            {"target_width", s.target_width}};
}

SpectralConfig spectral_from_json(const nlohmann::json& j) {
    SpectralConfig s;
    s.sample_rate = j.at("sample_rate").get<std::uint32_t>();
    s.n_fft = j.at("n_fft").get<std::size_t>();
    s.hop_length = j.at("hop_length").get<std::size_t>();
    s.n_mels = j.at("n_mels").get<std::size_t>();
    s.n_mfcc = j.at("n_mfcc").get<std::size_t>();
    s.f_min = j.at("f_min").get<double>();
    s.f_max = j.at("f_max").get<double>();
    s.clip_seconds = j.at("clip_seconds").get<double>();
    s.clip_hop_seconds = j.at("clip_hop_seconds").get<double>();
    s.target_height = j.at("target_height").get<std::size_t>();
    s.target_width = j.at("target_width").get<std::size_t>();
    return s;
}

} // namespace

void save_bundle(const std::string& path, const Model& model,
                 const SpectralConfig& spectral, const ChannelStats& stats,
                 const std::vector<std::string>& vocabulary, std::uint64_t seed) {
    const ModelConfig& mc = model.config();
    nlohmann::json header;
    header["format"] = "chirpfuse-bundle";
    header["version"] = 1;
    header["model"] = {{"d", mc.d},
                       {"d_emb", mc.d_emb},
                       {"input_height", mc.input_height},
                       {"input_width", mc.input_width},
                       {"conv_widths", mc.conv_widths},
                       {"head_hidden", mc.head_hidden},
                       {"n_classes", mc.n_classes},
                       {"strategy", fusion_strategy_name(mc.strategy)},
                       {"branch", branch_mode_name(mc.branch)},
                       {"tau1", mc.tau1},
                       {"tau2", mc.tau2}};
    header["spectral"] = spectral_to_json(spectral);
    header["norm"] = {{"channel_mean", stats.mean}, {"channel_std", stats.stdev}};
    header["vocabulary"] = vocabulary;
    header["seed"] = seed;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write bundle: " + path);
    f << header.dump() << "\n";

    const auto& params = model.parameters();
    wr_u32(f, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        wr_u32(f, static_cast<std::uint32_t>(p->name.size()));
        f.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        wr_u32(f, static_cast<std::uint32_t>(p->shape.size()));
        for (std::size_t e : p->shape) wr_u32(f, static_cast<std::uint32_t>(e));
        f.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!f) throw DataError("short write to " + path);
}

ModelBundle load_bundle(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open bundle: " + path);
    std::string header_line;
    if (!std::getline(f, header_line)) throw DataError("empty bundle: " + path);

    ModelBundle bundle;
    try {
        nlohmann::json header = nlohmann::json::parse(header_line);
        if (header.at("format").get<std::string>() != "chirpfuse-bundle" ||
            header.at("version").get<int>() != 1)
            throw DataError("unsupported bundle format: " + path);
        const auto& m = header.at("model");
        bundle.model.d = m.at("d").get<std::size_t>();
        bundle.model.d_emb = m.at("d_emb").get<std::size_t>();
        bundle.model.input_height = m.at("input_height").get<std::size_t>();
        bundle.model.input_width = m.at("input_width").get<std::size_t>();
        auto widths = m.at("conv_widths").get<std::vector<std::size_t>>();
        if (widths.size() != 3) throw DataError("bundle conv_widths must have 3 entries");
        std::copy(widths.begin(), widths.end(), bundle.model.conv_widths.begin());
        bundle.model.head_hidden = m.at("head_hidden").get<std::size_t>();
        bundle.model.n_classes = m.at("n_classes").get<std::size_t>();
        bundle.model.strategy =
            fusion_strategy_from_name(m.at("strategy").get<std::string>());
        bundle.model.branch = branch_mode_from_name(m.at("branch").get<std::string>());
        bundle.model.tau1 = m.at("tau1").get<double>();
        bundle.model.tau2 = m.at("tau2").get<double>();
        bundle.spectral = spectral_from_json(header.at("spectral"));
        auto mean = header.at("norm").at("channel_mean").get<std::vector<double>>();
        auto stdev = header.at("norm").at("channel_std").get<std::vector<double>>();
        if (mean.size() != 3 || stdev.size() != 3)
            throw DataError("bundle norm stats must have 3 channels");
        std::copy(mean.begin(), mean.end(), bundle.stats.mean.begin());
        std::copy(stdev.begin(), stdev.end(), bundle.stats.stdev.begin());
        bundle.vocabulary = header.at("vocabulary").get<std::vector<std::string>>();
        bundle.seed = header.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed bundle header in " + path + ": " + e.what());
    }

    bundle.net = std::make_shared<Model>(bundle.model);
    std::uint32_t n_tensors = rd_u32(f, path);
    if (n_tensors != bundle.net->parameters().size())
        throw DataError("bundle tensor count does not match the architecture: " + path);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        std::uint32_t name_len = rd_u32(f, path);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        std::uint32_t rank = rd_u32(f, path);
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) e = rd_u32(f, path);
        TensorPtr p = bundle.net->param(name);
        if (p->shape != shape)
            throw DataError("bundle tensor '" + name + "' has unexpected shape");
        f.read(reinterpret_cast<char*>(p->value.data()),
               static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        if (!f) throw DataError("truncated bundle: " + path);
    }
    return bundle;
}

} // namespace chirpfuse
