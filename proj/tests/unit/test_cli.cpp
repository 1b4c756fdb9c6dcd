#include "fslab/cli/commands.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace fslab;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(schema_version = 1

[data]
num_words = 4
per_word = 2
dims = 3
min_word_len = 2
max_word_len = 4

[recognizer]
enc_layers = 1
dec_layers = 1
hidden = 16
ffn = 32
heads = 2
head_hidden = 16

[training]
epochs = 2
batch_size = 4

[refiner]
input = 16
hidden = 8
epochs = 2

[generator]
layers = 1
hidden = 16
ffn = 32
heads = 2
pose_embed = 8
letter_embed = 8
diffusion_steps = 5
epochs = 2
)";

class Scratch {
public:
    explicit Scratch(const std::string& name) : root_(fs::temp_directory_path() / ("fslab_cli_" + name))
    {
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    ~Scratch() { fs::remove_all(root_); }
    fs::path operator/(const std::string& p) const { return root_ / p; }

private:
    fs::path root_;
};

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    out << text;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_text(path)); }

int run(std::vector<std::string> args) { return cli::run(args); }

int run_tool(const std::string& args)
{
    const std::string cmd = std::string(FSLAB_TOOL) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("synth-data is deterministic per seed")
{
    Scratch dir("synth");
    write_text(dir / "tiny.toml", kTinyConfig);
    const std::string cfg = (dir / "tiny.toml").string();
    REQUIRE(run({"synth-data", "--config", cfg, "--seed", "5", "--out", (dir / "a").string()}) == 0);
    REQUIRE(run({"synth-data", "--config", cfg, "--seed", "5", "--out", (dir / "b").string()}) == 0);
    REQUIRE(run({"synth-data", "--config", cfg, "--seed", "6", "--out", (dir / "c").string()}) == 0);
    for (const char* f : {"dataset.jsonl", "train.jsonl", "test.jsonl", "words.txt"}) {
        CHECK(read_text(dir / "a" / f) == read_text(dir / "b" / f));
    }
    CHECK(read_text(dir / "a/dataset.jsonl") != read_text(dir / "c/dataset.jsonl"));

    const auto m = read_json(dir / "a/manifest.json");
    CHECK(m["command"] == "synth-data");
    CHECK(m["seed"] == 5);
    CHECK(m["config"]["data"]["num_words"] == 4);
    CHECK(m["config_hash"].get<std::string>().size() == 64);
    CHECK(m["metrics"]["samples"] == 8);
    CHECK(m["outputs"]["dataset.jsonl"].get<std::string>().size() == 64);
    CHECK(m["outputs"]["dataset.jsonl"] == read_json(dir / "b/manifest.json")["outputs"]["dataset.jsonl"]);
}

TEST_CASE("evaluate scores a prediction file")
{
    Scratch dir("eval");
    write_text(dir / "self.jsonl", R"({"reference":"hello","hypothesis":"hello"}
{"reference":"asl","hypothesis":"asl"}
)");
    REQUIRE(run({"evaluate", "--predictions", (dir / "self.jsonl").string(), "--out", (dir / "a").string()}) == 0);
    const auto r = read_json(dir / "a/report.json");
    CHECK(r["letter_acc"] == 1.0);
    CHECK(r["top1"] == 1.0);

    write_text(dir / "off.jsonl", R"({"reference":"abcd","hypothesis":"abd"})" "\n");
    REQUIRE(run({"evaluate", "--predictions", (dir / "off.jsonl").string(), "--out", (dir / "b").string()}) == 0);
    CHECK(read_json(dir / "b/report.json")["letter_acc"] == doctest::Approx(0.75));
}

TEST_CASE("exit codes")
{
    Scratch dir("codes");
    const std::string out = (dir / "o").string();

    write_text(dir / "typo.toml", "schema_version = 1\n[training]\nepochz = 3\n");
    CHECK(run_tool("synth-data --config " + (dir / "typo.toml").string() + " --out " + out) == 2);
    write_text(dir / "section.toml", "schema_version = 1\n[trainer]\nepochs = 3\n");
    CHECK(run_tool("synth-data --config " + (dir / "section.toml").string() + " --out " + out) == 2);
    write_text(dir / "version.toml", "schema_version = 99\n");
    CHECK(run_tool("synth-data --config " + (dir / "version.toml").string() + " --out " + out) == 2);
    write_text(dir / "type.toml", "schema_version = 1\n[data]\nnum_words = \"many\"\n");
    CHECK(run_tool("synth-data --config " + (dir / "type.toml").string() + " --out " + out) == 2);
    CHECK(run_tool("synth-data --no-such-flag --out " + out) == 2);

    CHECK(run_tool("evaluate --predictions " + (dir / "missing.jsonl").string() + " --out " + out) == 3);
    write_text(dir / "broken.jsonl", "{\"reference\": 3}\n");
    CHECK(run_tool("evaluate --predictions " + (dir / "broken.jsonl").string() + " --out " + out) == 3);

    write_text(dir / "junk.ckpt", "not a checkpoint at all");
    write_text(dir / "data.jsonl", "");
    CHECK(run_tool("evaluate --model " + (dir / "junk.ckpt").string() + " --data " + (dir / "data.jsonl").string() +
                   " --out " + out) == 4);
}

TEST_CASE("pipeline smoke run")
{
    Scratch dir("pipeline");
    write_text(dir / "tiny.toml", kTinyConfig);
    const std::string cfg = (dir / "tiny.toml").string();
    const auto p = [&](const std::string& s) { return (dir / s).string(); };

    REQUIRE(run({"synth-data", "--config", cfg, "--seed", "1", "--out", p("data")}) == 0);
    REQUIRE(run({"train-recognizer", "--config", cfg, "--train", p("data/train.jsonl"), "--dev", p("data/test.jsonl"),
                 "--out", p("rec")}) == 0);
    CHECK(fs::exists(dir / "rec/recognizer.ckpt"));
    CHECK(read_json(dir / "rec/manifest.json")["command"] == "train-recognizer");

    REQUIRE(run({"evaluate", "--config", cfg, "--model", p("rec/recognizer.ckpt"), "--data", p("data/test.jsonl"),
                 "--train-words", p("data/train_words.txt"), "--out", p("eval")}) == 0);
    const auto report = read_json(dir / "eval/report.json");
    CHECK(report["letter_acc"].is_number());
    CHECK(fs::exists(dir / "eval/predictions.jsonl"));

    REQUIRE(run({"annotate-coarse", "--config", cfg, "--model", p("rec/recognizer.ckpt"), "--data",
                 p("data/train.jsonl"), "--out", p("coarse")}) == 0);
    REQUIRE(run({"train-refiner", "--config", cfg, "--model", p("rec/recognizer.ckpt"), "--data",
                 p("data/train.jsonl"), "--out", p("refiner")}) == 0);
    REQUIRE(run({"annotate-fine", "--config", cfg, "--model", p("rec/recognizer.ckpt"), "--refiner",
                 p("refiner/refiner.ckpt"), "--data", p("data/test.jsonl"), "--out", p("fine")}) == 0);
    CHECK(fs::exists(dir / "fine/fine_labels.jsonl"));

    REQUIRE(run({"train-generator", "--config", cfg, "--data", p("data/train.jsonl"), "--out", p("gen")}) == 0);
    REQUIRE(run({"build-benchmark", "--config", cfg, "--generator", p("gen/generator.ckpt"), "--words",
                 p("data/words.txt"), "--per-word", "2", "--seed", "3", "--out", p("bench")}) == 0);
    CHECK(read_json(dir / "bench/manifest.json")["metrics"]["samples"] == 8);

    REQUIRE(run({"noise-sweep", "--config", cfg, "--model", p("rec/recognizer.ckpt"), "--data", p("data/test.jsonl"),
                 "--out", p("noise")}) == 0);
    CHECK(read_json(dir / "noise/noise_sweep.json").size() == 11);

    CHECK(run({"evaluate", "--model", p("gen/generator.ckpt"), "--data", p("data/test.jsonl"), "--out", p("x")}) == 4);
}
