#include "fslab/cli/commands.hpp"

#include "fslab/core/digest.hpp"
#include "fslab/core/errors.hpp"
#include "fslab/core/pose_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#ifndef FSLAB_GIT_DESCRIBE
#define FSLAB_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;

namespace fslab::cli {

std::string git_describe() { return FSLAB_GIT_DESCRIBE; }

Manifest::Manifest(std::string command, const RunConfig& config, std::uint64_t seed)
    : command_(std::move(command)), config_(cli::to_json(config)), config_hash_(config_hash(config)), seed_(seed)
{
}

void Manifest::input(const fs::path& path) { inputs_[path.string()] = sha256_file(path); }

void Manifest::output(const fs::path& path) { outputs_[path.filename().string()] = sha256_file(path); }

nlohmann::json Manifest::to_json() const
{
    return {{"command", command_}, {"config_hash", config_hash_}, {"config", config_},
            {"seed", seed_},       {"inputs", inputs_},           {"outputs", outputs_},
            {"git_describe", git_describe()}, {"metrics", metrics_}};
}

void Manifest::write(const fs::path& out_dir) const
{
    std::ofstream out(out_dir / "manifest.json");
    out << to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write manifest in " + out_dir.string());
}

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config, "TOML run configuration");
    cmd->add_option("--seed", c.seed, "Master seed");
    cmd->add_option("--out", c.out, "Output directory")->required();
}

RunConfig config_of(const Common& c) { return c.config.empty() ? RunConfig{} : load_run_config(c.config); }

fs::path prepare_out(const Common& c)
{
    fs::path out(c.out);
    fs::create_directories(out);
    return out;
}

void require_file(const fs::path& path)
{
    if (!fs::is_regular_file(path)) throw DataError("missing input " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j)
{
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

class JsonLines {
public:
    explicit JsonLines(const fs::path& path) : out_(path)
    {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
    }
    void write(const nlohmann::json& j) { out_ << j.dump() << '\n' << std::flush; }

private:
    std::ofstream out_;
};

/// Reads a dataset for a recognizer expecting `pose_dim` inputs; 3D tracks go
/// through the 2D projection when the model is 2D.
std::vector<PoseSequence> load_for_recognizer(const fs::path& path, const Charset& charset, int pose_dim,
                                              Manifest& manifest)
{
    require_file(path);
    manifest.input(path);
    auto data = read_dataset(path, charset);
    for (auto& seq : data) {
        if (pose_dim == kJoints * 2) seq = datagen::project_sequence_2d(seq);
        for (const auto& t : seq.tracks) {
            if (t.dims * kJoints != pose_dim) {
                throw DataError(seq.id + ": pose width " + std::to_string(t.dims * kJoints) +
                                " does not match the model's " + std::to_string(pose_dim));
            }
        }
    }
    return data;
}

recognizer::Recognizer load_recognizer(const fs::path& path, const Charset& charset, Manifest& manifest)
{
    require_file(path);
    manifest.input(path);
    return recognizer::Recognizer::load(path, charset);
}

std::vector<std::string> load_words(const fs::path& path, Manifest& manifest)
{
    require_file(path);
    manifest.input(path);
    return read_word_list(path);
}

struct LabelScore {
    std::size_t hits = 0;
    std::size_t frames = 0;

    void add(const FrameLabels& predicted, const FrameLabels& truth)
    {
        frames += truth.labels.size();
        hits += static_cast<std::size_t>(annotate::frame_accuracy(predicted, truth) * truth.labels.size() + 0.5);
    }
    nlohmann::json value() const
    {
        return frames == 0 ? nlohmann::json(nullptr) : nlohmann::json(static_cast<double>(hits) / frames);
    }
};

// synth-data ----------------------------------------------------------------

struct SynthArgs {
    Common common;
    std::string words;
    int num_words = -1;
    int per_word = -1;
    int dims = -1;
    double distractor = -1.0;
};

int synth_data(const SynthArgs& a)
{
    RunConfig cfg = config_of(a.common);
    if (a.num_words > 0) cfg.data.num_words = a.num_words;
    if (a.per_word > 0) cfg.data.per_word = a.per_word;
    if (a.dims > 0) cfg.data.dims = a.dims;
    if (a.distractor >= 0.0) cfg.data.distractor_motion = a.distractor;
    cfg.data.validate();
    Manifest manifest("synth-data", cfg, a.common.seed);
    const fs::path out = prepare_out(a.common);
    const Charset charset;

    std::vector<std::string> words;
    if (!a.words.empty()) {
        words = load_words(a.words, manifest);
    } else {
        Rng rng = make_rng(a.common.seed, "synth.words");
        words = datagen::random_words(static_cast<std::size_t>(cfg.data.num_words), rng, cfg.data.min_word_len,
                                      cfg.data.max_word_len);
    }
    if (words.empty()) throw DataError("synth-data: empty word list");

    const datagen::TemplateBank bank(charset, cfg.data.template_seed, cfg.data.template_options());
    std::vector<PoseSequence> all;
    std::uint64_t index = 0;
    char id[32];
    for (const auto& w : words) {
        for (int k = 0; k < cfg.data.per_word; ++k, ++index) {
            Rng rng(mix64(fork_seed(a.common.seed, "synth.sample") + index));
            PoseSequence seq = datagen::synth_sequence(w, bank, rng, {cfg.data.repeats, true});
            if (cfg.data.distractor_motion > 0.0) {
                seq = datagen::add_distractor_hand(seq, bank, rng, cfg.data.distractor_motion);
            }
            std::snprintf(id, sizeof id, "syn-%06llu", static_cast<unsigned long long>(index + 1));
            seq.id = id;
            all.push_back(std::move(seq));
        }
    }

    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng = make_rng(a.common.seed, "synth.split");
    std::shuffle(order.begin(), order.end(), split_rng);
    const auto n_test = static_cast<std::size_t>(cfg.data.test_fraction * static_cast<double>(all.size()));
    std::vector<char> is_test(all.size(), 0);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;
    std::vector<PoseSequence> train, test;
    std::set<std::string> train_vocab;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (is_test[i]) {
            test.push_back(all[i]);
        } else {
            train_vocab.insert(all[i].word);
            train.push_back(all[i]);
        }
    }

    write_dataset(out / "dataset.jsonl", all, charset);
    write_dataset(out / "train.jsonl", train, charset);
    write_dataset(out / "test.jsonl", test, charset);
    write_word_list(out / "words.txt", words);
    const std::vector<std::string> vocab(train_vocab.begin(), train_vocab.end());
    write_word_list(out / "train_words.txt", vocab);
    for (const char* f : {"dataset.jsonl", "train.jsonl", "test.jsonl", "words.txt", "train_words.txt"}) {
        manifest.output(out / f);
    }
    manifest.metrics() = {{"samples", all.size()}, {"train", train.size()}, {"test", test.size()},
                          {"words", words.size()}, {"template_min_distance", bank.min_pairwise_distance()}};
    manifest.write(out);
    return exit_ok;
}

// train-recognizer ----------------------------------------------------------

struct TrainRecognizerArgs {
    Common common;
    std::string train;
    std::string dev;
};

int train_recognizer_cmd(const TrainRecognizerArgs& a)
{
    const RunConfig cfg = config_of(a.common);
    Manifest manifest("train-recognizer", cfg, a.common.seed);
    const fs::path out = prepare_out(a.common);
    const Charset charset;
    const auto train = load_for_recognizer(a.train, charset, cfg.recognizer.pose_dim, manifest);
    std::vector<PoseSequence> dev;
    if (!a.dev.empty()) dev = load_for_recognizer(a.dev, charset, cfg.recognizer.pose_dim, manifest);
    if (train.empty()) throw DataError("train-recognizer: empty training set");

    recognizer::Recognizer model(cfg.recognizer, charset, fork_seed(a.common.seed, "recognizer.init"));
    JsonLines log(out / "train_log.jsonl");
    const auto logs = recognizer::train_recognizer(
        model, train, dev, cfg.training, fork_seed(a.common.seed, "recognizer.train"),
        [&](const recognizer::EpochLog& e) {
            log.write(recognizer::to_json(e));
            std::cerr << "epoch " << e.epoch << " loss " << e.total << '\n';
        });
    model.save(out / "recognizer.ckpt");
    manifest.output(out / "recognizer.ckpt");
    manifest.output(out / "train_log.jsonl");
    if (!logs.empty()) manifest.metrics() = recognizer::to_json(logs.back());
    manifest.write(out);
    return exit_ok;
}

// annotate-coarse / annotate-fine -------------------------------------------

struct AnnotateArgs {
    Common common;
    std::string model;
    std::string refiner;
    std::string data;
};

int annotate_cmd(const AnnotateArgs& a, bool fine)
{
    const RunConfig cfg = config_of(a.common);
    Manifest manifest(fine ? "annotate-fine" : "annotate-coarse", cfg, a.common.seed);
    const fs::path out = prepare_out(a.common);
    const Charset charset;
    const auto model = load_recognizer(a.model, charset, manifest);
    std::optional<annotate::Refiner> refiner;
    if (fine) {
        require_file(a.refiner);
        manifest.input(a.refiner);
        refiner = annotate::Refiner::load(a.refiner, charset);
    }
    const auto data = load_for_recognizer(a.data, charset, model.config().pose_dim, manifest);

    std::vector<LabeledFrames> rows;
    LabelScore score;
    for (const auto& seq : data) {
        const auto labels = fine ? annotate::refine_annotate(model, *refiner, seq)
                                 : annotate::coarse_annotate_sequence(model, seq);
        const FrameLabels& mine = labels.of(seq.signing_hand);
        rows.push_back({seq.id, mine});
        if (seq.frame_labels) score.add(mine, *seq.frame_labels);
    }
    const fs::path file = out / (fine ? "fine_labels.jsonl" : "coarse_labels.jsonl");
    write_frame_labels(file, rows, charset);
    manifest.output(file);
    manifest.metrics() = {{"sequences", rows.size()}, {"frame_acc", score.value()}};
    manifest.write(out);
    return exit_ok;
}

// train-refiner -------------------------------------------------------------

struct TrainRefinerArgs {
    Common common;
    std::string model;
    std::string data;
};

int train_refiner_cmd(const TrainRefinerArgs& a)
{
    const RunConfig cfg = config_of(a.common);
    Manifest manifest("train-refiner", cfg, a.common.seed);
    const fs::path out = prepare_out(a.common);
    const Charset charset;
    const auto model = load_recognizer(a.model, charset, manifest);
    const auto data = load_for_recognizer(a.data, charset, model.config().pose_dim, manifest);
    if (cfg.refiner.input != model.config().hidden) {
        throw ConfigError("refiner.input does not match the recognizer hidden size");
    }
    std::vector<annotate::RefinerExample> examples;
    for (const auto& seq : data) examples.push_back(annotate::make_refiner_example(model, seq));

    annotate::Refiner refiner(cfg.refiner, charset, fork_seed(a.common.seed, "refiner.init"));
    JsonLines log(out / "refiner_log.jsonl");
    const auto losses = annotate::train_refiner(refiner, examples, fork_seed(a.common.seed, "refiner.train"),
                                                [&](int epoch, double loss) {
                                                    log.write({{"epoch", epoch}, {"loss", loss}});
                                                });
    refiner.save(out / "refiner.ckpt");
    manifest.output(out / "refiner.ckpt");
    manifest.output(out / "refiner_log.jsonl");
    manifest.metrics() = {{"final_loss", losses.empty() ? nlohmann::json(nullptr) : nlohmann::json(losses.back())}};
    manifest.write(out);
    return exit_ok;
}

// train-generator -----------------------------------------------------------

struct TrainGeneratorArgs {
    Common common;
    std::string data;
    std::string labels;
};

int train_generator_cmd(const TrainGeneratorArgs& a)
{
    const RunConfig cfg = config_of(a.common);
    Manifest manifest("train-generator", cfg, a.common.seed);
    const fs::path out = prepare_out(a.common);
    const Charset charset;
    require_file(a.data);
    manifest.input(a.data);
    const auto data = read_dataset(a.data, charset);
    std::map<std::string, FrameLabels> external;
    if (!a.labels.empty()) {
        require_file(a.labels);
        manifest.input(a.labels);
        for (auto& row : read_frame_labels(a.labels, charset)) external[row.id] = std::move(row.labels);
    }
    std::vector<generator::GeneratorExample> examples;
    for (const auto& seq : data) {
        const FrameLabels* labels = nullptr;
        if (!a.labels.empty()) {
            const auto it = external.find(seq.id);
            if (it == external.end()) throw DataError("train-generator: no frame labels for " + seq.id);
            labels = &it->second;
        } else if (seq.frame_labels) {
            labels = &*seq.frame_labels;
        } else {
            throw DataError("train-generator: " + seq.id + " has no frame labels; pass --labels");
        }
        auto ex = generator::make_generator_example(seq, *labels, charset);
        if (ex.x0.cols() != cfg.generator.pose_dim) {
            throw DataError("train-generator: " + seq.id + " pose width differs from generator.pose_dim");
        }
        examples.push_back(std::move(ex));
    }
    if (examples.empty()) throw DataError("train-generator: empty training set");

    generator::Generator gen(cfg.generator, charset, fork_seed(a.common.seed, "generator.init"));
    JsonLines log(out / "generator_log.jsonl");
    const auto losses = generator::train_generator(gen, examples, fork_seed(a.common.seed, "generator.train"),
                                                   [&](int epoch, double loss) {
                                                       log.write({{"epoch", epoch}, {"mse", loss}});
                                                   });
    gen.save(out / "generator.ckpt");
    manifest.output(out / "generator.ckpt");
    manifest.output(out / "generator_log.jsonl");
    manifest.metrics() = {{"final_mse", losses.empty() ? nlohmann::json(nullptr) : nlohmann::json(losses.back())}};
    manifest.write(out);
    return exit_ok;
}

// generate / build-benchmark ------------------------------------------------

struct BenchmarkArgs {
    Common common;
    std::string words;
    std::string exclude;
    std::string generator;
    int per_word = -1;
    int dims = -1;
};

int benchmark_cmd(const BenchmarkArgs& a, bool generate)
{
    const RunConfig cfg = config_of(a.common);
    Manifest manifest(generate ? "generate" : "build-benchmark", cfg, a.common.seed);
    const fs::path out = prepare_out(a.common);
    const Charset charset;
    const auto words = load_words(a.words, manifest);

    std::optional<generator::Generator> gen;
    if (!a.generator.empty()) {
        require_file(a.generator);
        manifest.input(a.generator);
        gen = generator::Generator::load(a.generator, charset);
    }
    datagen::BenchmarkOptions opts;
    opts.per_word = a.per_word > 0 ? a.per_word : 5;
    opts.repeats = cfg.data.repeats;
    opts.id_prefix = generate ? "gen" : "bench";
    const int native_dims = gen ? gen->config().pose_dim / kJoints : 3;
    opts.dims = a.dims > 0 ? a.dims : (generate ? native_dims : 3);
    if (opts.dims != 2 && opts.dims != 3) throw ConfigError("--dims must be 2 or 3");
    if (gen) {
        if (gen->config().pose_dim != kJoints * 3) throw ConfigError("benchmark generation needs a 3D generator");
        opts.sampler = generator::make_sampler(*gen);
    }
    if (!a.exclude.empty()) {
        const auto ex = load_words(a.exclude, manifest);
        opts.exclude.insert(ex.begin(), ex.end());
    }
    datagen::TemplateOptions topts = cfg.data.template_options();
    topts.dims = 3;
    const datagen::TemplateBank bank(charset, cfg.data.template_seed, topts);
    const auto bench = datagen::build_benchmark(words, bank, fork_seed(a.common.seed, "benchmark"), opts);

    const fs::path file = out / (generate ? "generated.jsonl" : "benchmark.jsonl");
    write_dataset(file, bench.samples, charset);
    manifest.output(file);
    manifest.metrics() = {{"samples", bench.samples.size()},
                          {"excluded_words", bench.excluded_words},
                          {"source", gen ? "generator" : "templates"}};
    manifest.write(out);
    return exit_ok;
}

// evaluate / bench-speed / noise-sweep --------------------------------------

struct EvalArgs {
    Common common;
    std::string model;
    std::string data;
    std::string predictions;
    std::string train_words;
    bool speed = false;
    bool noise = false;
    std::vector<int> batch_sizes;
};

std::vector<eval::Prediction> read_predictions(const fs::path& path, Manifest& manifest)
{
    require_file(path);
    manifest.input(path);
    std::ifstream in(path);
    std::vector<eval::Prediction> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            out.push_back({j.at("reference").get<std::string>(), j.at("hypothesis").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

nlohmann::json speed_runs(const recognizer::Recognizer& model, std::span<const PoseSequence> data,
                          const std::vector<int>& batch_sizes, nlohmann::json& warnings)
{
    nlohmann::json runs = nlohmann::json::array();
    std::vector<eval::SpeedReport> reports;
    for (int b : batch_sizes) {
        reports.push_back(eval::speed_benchmark(model, data, b));
        runs.push_back(eval::to_json(reports.back()));
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
        for (std::size_t k = 0; k < reports.size(); ++k) {
            if (reports[k].batch_size > reports[i].batch_size && reports[k].r_tp < reports[i].r_tp) {
                const std::string msg = "throughput at batch " + std::to_string(reports[k].batch_size) +
                                        " is below batch " + std::to_string(reports[i].batch_size);
                std::cerr << "warning: " << msg << '\n';
                warnings.push_back(msg);
            }
        }
    }
    return runs;
}

int evaluate_cmd(const EvalArgs& a)
{
    const RunConfig cfg = config_of(a.common);
    Manifest manifest("evaluate", cfg, a.common.seed);
    const fs::path out = prepare_out(a.common);
    const Charset charset;
    std::set<std::string> vocab;
    if (!a.train_words.empty()) {
        const auto w = load_words(a.train_words, manifest);
        vocab.insert(w.begin(), w.end());
    }
    const std::set<std::string>* vocab_ptr = a.train_words.empty() ? nullptr : &vocab;

    eval::EvalReport report;
    nlohmann::json warnings = nlohmann::json::array();
    if (!a.predictions.empty()) {
        const auto preds = read_predictions(a.predictions, manifest);
        report = eval::score_predictions(preds, vocab_ptr);
    } else {
        if (a.model.empty() || a.data.empty()) throw ConfigError("evaluate: pass --model and --data, or --predictions");
        const auto model = load_recognizer(a.model, charset, manifest);
        const auto data = load_for_recognizer(a.data, charset, model.config().pose_dim, manifest);
        if (data.empty()) throw DataError("evaluate: empty dataset");
        const auto preds = recognizer::recognize(model, data, cfg.eval.batch_size);
        report = eval::score_predictions(preds, vocab_ptr);
        if (cfg.eval.per_sample) report.letter_acc = eval::letter_accuracy(preds, eval::Aggregation::per_sample);
        {
            JsonLines pred_out(out / "predictions.jsonl");
            for (std::size_t i = 0; i < data.size(); ++i) {
                pred_out.write({{"id", data[i].id}, {"reference", preds[i].reference},
                                {"hypothesis", preds[i].hypothesis}});
            }
        }
        manifest.output(out / "predictions.jsonl");
        const bool multi = std::any_of(data.begin(), data.end(),
                                       [](const PoseSequence& s) { return s.hand_count() > 1 && s.signing_hand; });
        if (multi) report.hand_det_acc = eval::measure_hand_detection(model, data);
        if (a.speed) {
            const auto b = eval::speed_benchmark(model, data, cfg.eval.batch_size);
            report.speed = b;
        }
        if (a.noise) {
            report.noise_sweep = eval::noise_sweep(model, data, cfg.eval.noise_levels,
                                                   fork_seed(a.common.seed, "noise_sweep"));
        }
    }
    nlohmann::json j = eval::to_json(report);
    write_json(out / "report.json", j);
    manifest.output(out / "report.json");
    manifest.metrics() = j;
    manifest.write(out);
    return exit_ok;
}

int bench_speed_cmd(const EvalArgs& a)
{
    const RunConfig cfg = config_of(a.common);
    Manifest manifest("bench-speed", cfg, a.common.seed);
    const fs::path out = prepare_out(a.common);
    const Charset charset;
    const auto model = load_recognizer(a.model, charset, manifest);
    const auto data = load_for_recognizer(a.data, charset, model.config().pose_dim, manifest);
    if (data.empty()) throw DataError("bench-speed: empty dataset");
    nlohmann::json warnings = nlohmann::json::array();
    const auto sizes = a.batch_sizes.empty() ? cfg.eval.speed_batch_sizes : a.batch_sizes;
    nlohmann::json j = {{"runs", speed_runs(model, data, sizes, warnings)}, {"warnings", warnings}};
    write_json(out / "speed.json", j);
    manifest.metrics() = j;
    manifest.write(out);
    return exit_ok;
}

int noise_sweep_cmd(const EvalArgs& a)
{
    const RunConfig cfg = config_of(a.common);
    Manifest manifest("noise-sweep", cfg, a.common.seed);
    const fs::path out = prepare_out(a.common);
    const Charset charset;
    const auto model = load_recognizer(a.model, charset, manifest);
    const auto data = load_for_recognizer(a.data, charset, model.config().pose_dim, manifest);
    if (data.empty()) throw DataError("noise-sweep: empty dataset");
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& p :
         eval::noise_sweep(model, data, cfg.eval.noise_levels, fork_seed(a.common.seed, "noise_sweep"))) {
        sweep.push_back({{"sigma", p.sigma}, {"letter_acc", p.letter_acc}});
    }
    write_json(out / "noise_sweep.json", sweep);
    manifest.output(out / "noise_sweep.json");
    manifest.metrics() = {{"noise_sweep", sweep}};
    manifest.write(out);
    return exit_ok;
}

}  // namespace

int run(int argc, char** argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

int run(const std::vector<std::string>& args)
{
    CLI::App app{"fingerspelling recognition, annotation and generation lab", "fslab"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* c = app.add_subcommand("synth-data", "Synthesize a template corpus with a train/test split");
    add_common(c, synth.common);
    c->add_option("--words", synth.words, "Word list (default: random words)");
    c->add_option("--num-words", synth.num_words, "Random word count");
    c->add_option("--per-word", synth.per_word, "Sequences per word");
    c->add_option("--dims", synth.dims, "Coordinate dimensions (2 or 3)");
    c->add_option("--distractor", synth.distractor, "Distractor-hand motion scale (0: none)");

    TrainRecognizerArgs tr;
    c = app.add_subcommand("train-recognizer", "Train the recognizer");
    add_common(c, tr.common);
    c->add_option("--train", tr.train)->required();
    c->add_option("--dev", tr.dev);

    AnnotateArgs coarse;
    c = app.add_subcommand("annotate-coarse", "Frame labels from thresholded cross-attention");
    add_common(c, coarse.common);
    c->add_option("--model", coarse.model)->required();
    c->add_option("--data", coarse.data)->required();

    TrainRefinerArgs trf;
    c = app.add_subcommand("train-refiner", "Train the frame-label refiner on coarse labels");
    add_common(c, trf.common);
    c->add_option("--model", trf.model)->required();
    c->add_option("--data", trf.data)->required();

    AnnotateArgs fine;
    c = app.add_subcommand("annotate-fine", "Frame labels from the refiner");
    add_common(c, fine.common);
    c->add_option("--model", fine.model)->required();
    c->add_option("--refiner", fine.refiner)->required();
    c->add_option("--data", fine.data)->required();

    TrainGeneratorArgs tg;
    c = app.add_subcommand("train-generator", "Train the pose diffusion generator");
    add_common(c, tg.common);
    c->add_option("--data", tg.data)->required();
    c->add_option("--labels", tg.labels, "Frame-label file (default: ground truth in the dataset)");

    BenchmarkArgs gen;
    c = app.add_subcommand("generate", "Sample pose sequences for a word list");
    add_common(c, gen.common);
    c->add_option("--generator", gen.generator)->required();
    c->add_option("--words", gen.words)->required();
    c->add_option("--per-word", gen.per_word);
    c->add_option("--dims", gen.dims);

    BenchmarkArgs bench;
    c = app.add_subcommand("build-benchmark", "Build an out-of-vocabulary benchmark");
    add_common(c, bench.common);
    c->add_option("--words", bench.words)->required();
    c->add_option("--exclude", bench.exclude, "Words that must not appear");
    c->add_option("--generator", bench.generator, "Generator checkpoint (default: templates)");
    c->add_option("--per-word", bench.per_word);
    c->add_option("--dims", bench.dims);

    EvalArgs ev;
    c = app.add_subcommand("evaluate", "Score a recognizer or a prediction file");
    add_common(c, ev.common);
    c->add_option("--model", ev.model);
    c->add_option("--data", ev.data);
    c->add_option("--predictions", ev.predictions, "JSON lines with reference and hypothesis");
    c->add_option("--train-words", ev.train_words, "Training vocabulary for the IV/OOV split");
    c->add_flag("--speed", ev.speed);
    c->add_flag("--noise-sweep", ev.noise);

    EvalArgs speed;
    c = app.add_subcommand("bench-speed", "Latency and throughput of greedy decoding");
    add_common(c, speed.common);
    c->add_option("--model", speed.model)->required();
    c->add_option("--data", speed.data)->required();
    c->add_option("--batch-size", speed.batch_sizes);

    EvalArgs noise;
    c = app.add_subcommand("noise-sweep", "Letter accuracy under Gaussian pose noise");
    add_common(c, noise.common);
    c->add_option("--model", noise.model)->required();
    c->add_option("--data", noise.data)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        const auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "synth-data") return synth_data(synth);
        if (name == "train-recognizer") return train_recognizer_cmd(tr);
        if (name == "annotate-coarse") return annotate_cmd(coarse, false);
        if (name == "train-refiner") return train_refiner_cmd(trf);
        if (name == "annotate-fine") return annotate_cmd(fine, true);
        if (name == "train-generator") return train_generator_cmd(tg);
        if (name == "generate") return benchmark_cmd(gen, true);
        if (name == "build-benchmark") return benchmark_cmd(bench, false);
        if (name == "evaluate") return evaluate_cmd(ev);
        if (name == "bench-speed") return bench_speed_cmd(speed);
        if (name == "noise-sweep") return noise_sweep_cmd(noise);
        return exit_config;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const CheckpointMismatch& e) {
        std::cerr << "checkpoint mismatch: " << e.what() << '\n';
        return exit_checkpoint;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
}

}  // namespace fslab::cli
