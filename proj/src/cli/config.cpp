#include "fslab/cli/config.hpp"

#include "fslab/core/digest.hpp"
#include "fslab/core/errors.hpp"

#include <toml.hpp>

#include <fstream>
#include <sstream>

namespace fslab::cli {

void DataConfig::validate() const
{
    if (dims != 2 && dims != 3) throw ConfigError("data: dims must be 2 or 3");
    if (transition_frames < 0) throw ConfigError("data: transition_frames must be non-negative");
    if (jitter_sigma < 0.0 || offset_scale <= 0.0) throw ConfigError("data: jitter_sigma/offset_scale out of range");
    if (num_words < 1 || per_word < 1) throw ConfigError("data: num_words and per_word must be positive");
    if (min_word_len < 1 || max_word_len < min_word_len) throw ConfigError("data: invalid word length range");
    if (distractor_motion < 0.0) throw ConfigError("data: distractor_motion must be non-negative");
    if (test_fraction < 0.0 || test_fraction >= 1.0) throw ConfigError("data: test_fraction must lie in [0, 1)");
    if (repeats.letter_min < 1 || repeats.letter_max < repeats.letter_min || repeats.space_min < 1 ||
        repeats.space_max < repeats.space_min) {
        throw ConfigError("data: invalid repeat ranges");
    }
}

datagen::TemplateOptions DataConfig::template_options() const
{
    return {dims, transition_frames, jitter_sigma, offset_scale};
}

void EvalConfig::validate() const
{
    if (batch_size < 1) throw ConfigError("eval: batch_size must be positive");
    for (int b : speed_batch_sizes) {
        if (b < 1) throw ConfigError("eval: speed_batch_sizes must be positive");
    }
    for (double s : noise_levels) {
        if (s < 0.0) throw ConfigError("eval: noise_levels must be non-negative");
    }
}

namespace {

nlohmann::json data_json(const DataConfig& d)
{
    return {{"template_seed", d.template_seed},
            {"dims", d.dims},
            {"transition_frames", d.transition_frames},
            {"jitter_sigma", d.jitter_sigma},
            {"offset_scale", d.offset_scale},
            {"num_words", d.num_words},
            {"min_word_len", d.min_word_len},
            {"max_word_len", d.max_word_len},
            {"per_word", d.per_word},
            {"distractor_motion", d.distractor_motion},
            {"test_fraction", d.test_fraction},
            {"letter_repeat_min", d.repeats.letter_min},
            {"letter_repeat_max", d.repeats.letter_max},
            {"space_repeat_min", d.repeats.space_min},
            {"space_repeat_max", d.repeats.space_max}};
}

DataConfig data_from_json(const nlohmann::json& j)
{
    DataConfig d;
    d.template_seed = j.at("template_seed");
    d.dims = j.at("dims");
    d.transition_frames = j.at("transition_frames");
    d.jitter_sigma = j.at("jitter_sigma");
    d.offset_scale = j.at("offset_scale");
    d.num_words = j.at("num_words");
    d.min_word_len = j.at("min_word_len");
    d.max_word_len = j.at("max_word_len");
    d.per_word = j.at("per_word");
    d.distractor_motion = j.at("distractor_motion");
    d.test_fraction = j.at("test_fraction");
    d.repeats.letter_min = j.at("letter_repeat_min");
    d.repeats.letter_max = j.at("letter_repeat_max");
    d.repeats.space_min = j.at("space_repeat_min");
    d.repeats.space_max = j.at("space_repeat_max");
    d.validate();
    return d;
}

nlohmann::json eval_json(const EvalConfig& e)
{
    return {{"batch_size", e.batch_size},
            {"speed_batch_sizes", e.speed_batch_sizes},
            {"noise_levels", e.noise_levels},
            {"per_sample", e.per_sample}};
}

EvalConfig eval_from_json(const nlohmann::json& j)
{
    EvalConfig e;
    e.batch_size = j.at("batch_size");
    e.speed_batch_sizes = j.at("speed_batch_sizes").get<std::vector<int>>();
    e.noise_levels = j.at("noise_levels").get<std::vector<double>>();
    e.per_sample = j.at("per_sample");
    e.validate();
    return e;
}

void check_types(const nlohmann::json& given, const nlohmann::json& base, const std::string& where)
{
    if (base.is_number_integer() && !given.is_number_integer()) {
        throw ConfigError(where + ": expected an integer");
    }
    if (base.is_number_float() && !given.is_number()) throw ConfigError(where + ": expected a number");
    if (base.is_boolean() && !given.is_boolean()) throw ConfigError(where + ": expected true or false");
    if (base.is_string() && !given.is_string()) throw ConfigError(where + ": expected a string");
    if (base.is_array()) {
        if (!given.is_array()) throw ConfigError(where + ": expected an array");
        if (!base.empty()) {
            for (const auto& v : given) check_types(v, base.front(), where + "[]");
        }
    }
}

}  // namespace

nlohmann::json to_json(const RunConfig& cfg)
{
    return {{"schema_version", cfg.schema_version},
            {"data", data_json(cfg.data)},
            {"recognizer", recognizer::to_json(cfg.recognizer)},
            {"training", recognizer::to_json(cfg.training)},
            {"refiner", annotate::to_json(cfg.refiner)},
            {"generator", generator::to_json(cfg.generator)},
            {"eval", eval_json(cfg.eval)}};
}

RunConfig run_config_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw ConfigError("config: top level must be a table");
    if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
    if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion) {
        throw ConfigError("config: unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
    }
    nlohmann::json merged = to_json(RunConfig{});
    for (const auto& [section, body] : j.items()) {
        if (section == "schema_version") continue;
        if (!merged.contains(section)) throw ConfigError("config: unknown section '" + section + "'");
        if (!body.is_object()) throw ConfigError("config: '" + section + "' must be a table");
        for (const auto& [key, value] : body.items()) {
            auto& slot = merged[section];
            if (!slot.contains(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
            check_types(value, slot[key], section + "." + key);
            slot[key] = value;
        }
    }
    try {
        RunConfig cfg;
        cfg.data = data_from_json(merged["data"]);
        cfg.recognizer = recognizer::recognizer_config_from_json(merged["recognizer"]);
        cfg.training = recognizer::train_config_from_json(merged["training"]);
        cfg.refiner = annotate::refiner_config_from_json(merged["refiner"]);
        cfg.generator = generator::generator_config_from_json(merged["generator"]);
        cfg.eval = eval_from_json(merged["eval"]);
        if (cfg.refiner.input != cfg.recognizer.hidden) {
            throw ConfigError("config: refiner.input must equal recognizer.hidden");
        }
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig parse_run_config(std::string_view toml_text, std::string_view source)
{
    toml::table table;
    try {
        table = toml::parse(toml_text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config: " << e.description() << " at " << e.source().begin;
        throw ConfigError(msg.str());
    }
    std::ostringstream json;
    json << toml::json_formatter{table};
    return run_config_from_json(nlohmann::json::parse(json.str()));
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), path.string());
}

std::string config_hash(const RunConfig& cfg)
{
    return sha256_hex(to_json(cfg).dump());
}

}  // namespace fslab::cli
