#pragma once

#include "fslab/annotate/annotate.hpp"
#include "fslab/datagen/datagen.hpp"
#include "fslab/eval/harness.hpp"
#include "fslab/generator/generator.hpp"
#include "fslab/recognizer/training.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fslab::cli {

inline constexpr int kSchemaVersion = 1;

struct DataConfig {
    std::uint64_t template_seed = 1;
    int dims = 2;
    int transition_frames = 1;
    double jitter_sigma = 0.01;
    double offset_scale = 0.25;
    int num_words = 30;
    int min_word_len = 3;
    int max_word_len = 8;
    int per_word = 5;
    double distractor_motion = 0.0;  // 0 keeps a single hand
    double test_fraction = 0.2;
    datagen::Repeats repeats;

    void validate() const;
    datagen::TemplateOptions template_options() const;
};

struct EvalConfig {
    int batch_size = 32;
    std::vector<int> speed_batch_sizes{1, 32};
    std::vector<double> noise_levels = eval::default_noise_levels();
    bool per_sample = false;

    void validate() const;
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    DataConfig data;
    recognizer::RecognizerConfig recognizer;
    recognizer::TrainConfig training;
    annotate::RefinerConfig refiner;
    generator::GeneratorConfig generator;
    EvalConfig eval;
};

nlohmann::json to_json(const RunConfig& cfg);

/// Overlays a JSON document onto the defaults. Every section and key must be
/// known and `schema_version` must match; violations throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig parse_run_config(std::string_view toml_text, std::string_view source = "config");
RunConfig load_run_config(const std::filesystem::path& path);

/// sha256 of the canonical JSON form.
std::string config_hash(const RunConfig& cfg);

}  // namespace fslab::cli
