#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "chirpfuse/archive.hpp"

using namespace chirpfuse;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

std::string cli_binary() {
    const char* bin = std::getenv("CHIRPFUSE_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "CHIRPFUSE_BIN must point at the CLI executable");
    return bin;
}

RunResult run_cli(const std::string& args) {
    const std::string cmd = cli_binary() + std::string(" ") + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "chirpfuse_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

// A small but complete pipeline configuration: 2 classes, 1-second clips,
// reduced grids so the suite stays fast.
fs::path write_pipeline_config(const fs::path& dir) {
    json cfg = {
        {"spectral", {{"target_height", 32}, {"target_width", 32}}},
        {"provider", {{"d_emb", 16}, {"seed", 9}}},
        {"train", {{"epochs", 2}, {"batch_size", 8}, {"learning_rate", 0.003}, {"seed", 5}}},
        {"fusion", {{"d", 8}, {"strategy", "fixed"}}},
        {"synth",
         {{"n_classes", 2}, {"clips_per_class", 10}, {"duration_seconds", 1.0}, {"seed", 11}}},
        {"paths",
         {{"manifest", (dir / "data/manifest.csv").string()},
          {"features", (dir / "features.sslf").string()},
          {"embeddings", (dir / "emb.ssle").string()},
          {"out", (dir / "run").string()}}},
    };
    fs::path path = dir / "cfg.json";
    std::ofstream(path) << cfg.dump(2);
    return path;
}

int count_lines(const std::string& text, const std::string& needle) {
    int n = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

} // namespace

TEST_CASE("usage errors exit with code one") {
    CHECK_EQ(run_cli("").code, 1);
    CHECK_EQ(run_cli("fly").code, 1);
    CHECK_EQ(run_cli("--help").code, 0);
    CHECK_EQ(run_cli("eval").code, 1); // --bundle is required
}

TEST_CASE("configuration problems exit with code one and name the key") {
    fs::path dir = fresh_dir("config_errors");
    std::ofstream(dir / "unknown.json") << R"({"trian": {"epochs": 3}})";
    RunResult r = run_cli("synth --config " + (dir / "unknown.json").string());
    CHECK_EQ(r.code, 1);
    CHECK(r.out.find("trian") != std::string::npos);

    std::ofstream(dir / "badtype.json") << R"({"train": {"epochs": "many"}})";
    RunResult r2 = run_cli("synth --config " + (dir / "badtype.json").string());
    CHECK_EQ(r2.code, 1);
    CHECK(r2.out.find("train.epochs") != std::string::npos);

    std::ofstream(dir / "badjson.json") << "{nope";
    CHECK_EQ(run_cli("synth --config " + (dir / "badjson.json").string()).code, 1);

    CHECK_EQ(run_cli("synth --config " + (dir / "absent.json").string()).code, 1);

    std::ofstream(dir / "badclasses.json") << R"({"synth": {"n_classes": 1}})";
    CHECK_EQ(run_cli("synth --config " + (dir / "badclasses.json").string()).code, 1);

    CHECK_EQ(run_cli("train --strategy concat --manifest x.csv --features y.sslf").code, 1);
    CHECK_EQ(run_cli("train --features y.sslf").code, 1); // no manifest
}

TEST_CASE("missing data exits with code two") {
    fs::path dir = fresh_dir("data_errors");
    CHECK_EQ(run_cli("eval --bundle " + (dir / "absent.cfb").string() + " --manifest m.csv").code, 2);

    std::ofstream(dir / "manifest.csv") << "id,path,label,split\na,missing.wav,l,train\nb,missing2.wav,l,test\n";
    RunResult r = run_cli("extract --manifest " + (dir / "manifest.csv").string() + " --out " +
                          dir.string());
    CHECK_EQ(r.code, 2);
    CHECK(r.out.find("record 'a'") != std::string::npos);
}

TEST_CASE("the full pipeline runs, reruns bitwise, and honours the seed flag") {
    fs::path dir = fresh_dir("pipeline");
    fs::path cfg = write_pipeline_config(dir);
    const std::string cfg_arg = " --config " + cfg.string();

    // Generate the corpus: 2 classes x 10 clips, split 7/1/2 per class.
    RunResult synth = run_cli("synth" + cfg_arg + " --out " + (dir / "data").string());
    CHECK_EQ(synth.code, 0);
    int wavs = 0;
    for (auto& e : fs::directory_iterator(dir / "data/wavs"))
        if (e.path().extension() == ".wav") ++wavs;
    CHECK_EQ(wavs, 20);
    const std::string manifest = slurp(dir / "data/manifest.csv");
    CHECK_EQ(count_lines(manifest, "\n"), 21);
    CHECK_EQ(count_lines(manifest, ",train"), 14);
    CHECK_EQ(count_lines(manifest, ",val"), 2);
    CHECK_EQ(count_lines(manifest, ",test"), 4);
    CHECK(manifest.rfind("id,path,label,split\n", 0) == 0);

    // Extraction writes one record per manifest row, in manifest order.
    CHECK_EQ(run_cli("extract" + cfg_arg).code, 0);
    StackArchive archive = read_stack_archive((dir / "features.sslf").string());
    CHECK_EQ(archive.records.size(), 20);
    CHECK_EQ(archive.height, 32);
    CHECK_EQ(archive.width, 32);
    CHECK_EQ(archive.records[0].id, "c00_0000");
    EmbeddingArchive emb = read_embedding_archive((dir / "emb.ssle").string());
    CHECK_EQ(emb.records.size(), 20);
    CHECK_EQ(emb.d_emb, 16);
    CHECK_FALSE(emb.labels.has_value());

    // Extraction is bitwise reproducible.
    fs::path second = dir / "features2.sslf";
    CHECK_EQ(run_cli("extract" + cfg_arg + " --features " + second.string()).code, 0);
    CHECK(slurp(dir / "features.sslf") == slurp(second));

    // Training writes a bundle and a history; the same seed reproduces both
    // byte for byte, a different seed does not.
    CHECK_EQ(run_cli("train" + cfg_arg).code, 0);
    CHECK_EQ(run_cli("train" + cfg_arg + " --out " + (dir / "run_same").string()).code, 0);
    CHECK(slurp(dir / "run/history.json") == slurp(dir / "run_same/history.json"));
    CHECK(slurp(dir / "run/bundle.cfb") == slurp(dir / "run_same/bundle.cfb"));

    CHECK_EQ(run_cli("train" + cfg_arg + " --seed 987 --out " + (dir / "run_seed").string()).code, 0);
    CHECK(slurp(dir / "run/history.json") != slurp(dir / "run_seed/history.json"));

    json history = json::parse(slurp(dir / "run/history.json"));
    REQUIRE_EQ(history.size(), 2);
    CHECK_EQ(history[0]["epoch"], 0);
    CHECK(history[0].contains("train_loss"));
    CHECK(history[0].contains("val_accuracy"));

    // Evaluation prints the one-line summary and writes the metric file.
    RunResult ev = run_cli("eval" + cfg_arg + " --bundle " + (dir / "run/bundle.cfb").string());
    CHECK_EQ(ev.code, 0);
    CHECK(ev.out.find("acc=") != std::string::npos);
    CHECK(ev.out.find("prc=") != std::string::npos);
    CHECK(ev.out.find("rec=") != std::string::npos);
    CHECK(ev.out.find("f1=") != std::string::npos);
    CHECK(ev.out.find("params=") != std::string::npos);
    json metrics = json::parse(slurp(dir / "run/metrics.json"));
    for (const char* key :
         {"accuracy", "precision_macro", "recall_macro", "f1_macro", "params", "confusion"})
        CHECK(metrics.contains(key));
    CHECK_GE(metrics["accuracy"].get<double>(), 0.0);
    CHECK_LE(metrics["accuracy"].get<double>(), 1.0);
    CHECK_EQ(metrics["confusion"].size(), 2);

    // Evaluating a split with different data is possible.
    RunResult ev_val = run_cli("eval" + cfg_arg + " --bundle " + (dir / "run/bundle.cfb").string() +
                               " --split val --out " + (dir / "run_val").string());
    CHECK_EQ(ev_val.code, 0);

    // Fused-feature export: one record per test example, width 2d, labels
    // appended, bitwise stable across reruns.
    CHECK_EQ(run_cli("dump-embeddings" + cfg_arg + " --bundle " + (dir / "run/bundle.cfb").string()).code,
             0);
    EmbeddingArchive fused = read_embedding_archive((dir / "run/fused_test.ssle").string());
    CHECK_EQ(fused.records.size(), 4);
    CHECK_EQ(fused.d_emb, 16); // 2 * d with d = 8
    REQUIRE(fused.labels.has_value());
    CHECK_EQ(fused.labels->size(), 4);

    fs::path fused2 = dir / "fused_again.ssle";
    CHECK_EQ(run_cli("dump-embeddings" + cfg_arg + " --bundle " + (dir / "run/bundle.cfb").string() +
                     " --out-file " + fused2.string())
                 .code,
             0);
    CHECK(slurp(dir / "run/fused_test.ssle") == slurp(fused2));
}

TEST_CASE("the sweep emits one row per strategy and budget") {
    fs::path dir = fresh_dir("sweep");
    fs::path cfg = write_pipeline_config(dir);
    const std::string cfg_arg = " --config " + cfg.string();
    REQUIRE_EQ(run_cli("synth" + cfg_arg + " --out " + (dir / "data").string()).code, 0);
    REQUIRE_EQ(run_cli("extract" + cfg_arg).code, 0);

    RunResult sweep = run_cli("sweep" + cfg_arg + " --budgets 2,7");
    CHECK_EQ(sweep.code, 0);
    json rows = json::parse(slurp(dir / "run/sweep.json"));
    REQUIRE_EQ(rows.size(), 6); // 3 strategies x 2 budgets
    CHECK_EQ(rows[0]["strategy"], "fixed");
    CHECK_EQ(rows[0]["budget"], 2);
    CHECK_EQ(rows[1]["budget"], 7);
    CHECK_EQ(rows[2]["strategy"], "shared");
    CHECK_EQ(rows[4]["strategy"], "sampling");
    for (const auto& row : rows) CHECK(row["metrics"].contains("accuracy"));

    // Budgets beyond the per-class train count are rejected up front.
    CHECK_EQ(run_cli("sweep" + cfg_arg + " --budgets 2,8").code, 1);
    CHECK_EQ(run_cli("sweep" + cfg_arg + " --budgets 7,2").code, 1);
}
