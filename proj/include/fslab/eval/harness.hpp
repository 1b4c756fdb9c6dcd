#pragma once

#include "fslab/eval/metrics.hpp"
#include "fslab/recognizer/recognizer.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fslab::eval {

struct HardwareInfo {
    std::string cpu_model;
    unsigned logical_cores = 0;
    std::string compiler;
    std::string build_type;
};

HardwareInfo hardware_info();
nlohmann::json to_json(const HardwareInfo& hw);

struct SpeedReport {
    int batch_size = 1;
    std::size_t samples = 0;
    std::size_t letters = 0;  // recognized letters
    std::size_t frames = 0;   // pose frames over all hands
    double t_lat = 0.0;       // seconds for the whole dataset
    double r_tp = 0.0;        // samples / s
    double r_lps = 0.0;       // letters / s
    double fps = 0.0;         // pose frames / s
    HardwareInfo hardware;
};

nlohmann::json to_json(const SpeedReport& report);

/// Times greedy decoding of the whole dataset at the given batch size.
SpeedReport speed_benchmark(const recognizer::Recognizer& model, std::span<const PoseSequence> data, int batch_size);

/// Signing hand chosen from the layer-averaged cross-attention of the greedy decode.
std::vector<HandIdentity> detect_hands(const recognizer::Recognizer& model, std::span<const PoseSequence> data);

/// Detection accuracy over the sequences that carry a ground-truth signing hand.
double measure_hand_detection(const recognizer::Recognizer& model, std::span<const PoseSequence> data);

struct NoisePoint {
    double sigma = 0.0;
    double letter_acc = 0.0;
};

/// 0, 0.01, ..., 0.10.
std::vector<double> default_noise_levels();

/// Letter accuracy under additive Gaussian pose noise. Each sample reuses the
/// same unit draw at every level, so only the scale changes along the sweep.
std::vector<NoisePoint> noise_sweep(const recognizer::Recognizer& model, std::span<const PoseSequence> data,
                                    std::span<const double> sigmas, std::uint64_t seed);

struct EvalReport {
    double letter_acc = 0.0;
    double top1 = 0.0;
    std::optional<double> hand_det_acc;
    std::optional<double> iv_acc;
    std::optional<double> oov_acc;
    std::size_t samples = 0;
    std::size_t empty_references = 0;
    std::optional<SpeedReport> speed;
    std::vector<NoisePoint> noise_sweep;
};

nlohmann::json to_json(const EvalReport& report);

/// Accuracy figures from prediction pairs. IV/OOV entries stay empty when no
/// training vocabulary is supplied or the corresponding split is empty.
EvalReport score_predictions(std::span<const Prediction> pairs, const std::set<std::string>* train_vocabulary);

}  // namespace fslab::eval
