#include "fslab/eval/harness.hpp"

#include "fslab/core/errors.hpp"
#include "fslab/datagen/datagen.hpp"
#include "fslab/recognizer/training.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#ifndef FSLAB_BUILD_TYPE
#define FSLAB_BUILD_TYPE "unknown"
#endif

namespace fslab::eval {

HardwareInfo hardware_info()
{
    HardwareInfo hw;
    hw.logical_cores = std::thread::hardware_concurrency();
    hw.compiler = __VERSION__;
    hw.build_type = FSLAB_BUILD_TYPE;
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) hw.cpu_model = line.substr(line.find_first_not_of(' ', colon + 1));
            break;
        }
    }
    if (hw.cpu_model.empty()) hw.cpu_model = "unknown";
    return hw;
}

nlohmann::json to_json(const HardwareInfo& hw)
{
    return {{"cpu_model", hw.cpu_model},
            {"logical_cores", hw.logical_cores},
            {"compiler", hw.compiler},
            {"build_type", hw.build_type}};
}

nlohmann::json to_json(const SpeedReport& r)
{
    return {{"batch_size", r.batch_size}, {"samples", r.samples}, {"letters", r.letters},
            {"frames", r.frames},         {"t_lat", r.t_lat},     {"R_tp", r.r_tp},
            {"R_lps", r.r_lps},           {"FPS", r.fps},         {"hardware", to_json(r.hardware)}};
}

SpeedReport speed_benchmark(const recognizer::Recognizer& model, std::span<const PoseSequence> data, int batch_size)
{
    if (batch_size < 1) throw ConfigError("speed benchmark: batch_size must be positive");
    if (data.empty()) throw DataError("speed benchmark: empty dataset");
    SpeedReport report;
    report.batch_size = batch_size;
    report.hardware = hardware_info();
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < data.size(); i += static_cast<std::size_t>(batch_size)) {
        const std::size_t n = std::min(data.size() - i, static_cast<std::size_t>(batch_size));
        for (const auto& r : model.greedy_decode_batch(data.subspan(i, n))) report.letters += r.word.size();
    }
    report.t_lat = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.samples = data.size();
    for (const auto& seq : data) report.frames += static_cast<std::size_t>(seq.frame_count() * seq.hand_count());
    report.r_tp = static_cast<double>(report.samples) / report.t_lat;
    report.r_lps = static_cast<double>(report.letters) / report.t_lat;
    report.fps = static_cast<double>(report.frames) / report.t_lat;
    return report;
}

std::vector<HandIdentity> detect_hands(const recognizer::Recognizer& model, std::span<const PoseSequence> data)
{
    std::vector<HandIdentity> out;
    out.reserve(data.size());
    constexpr std::size_t chunk = 32;
    for (std::size_t i = 0; i < data.size(); i += chunk) {
        const auto decoded = model.greedy_decode_batch(data.subspan(i, std::min(chunk, data.size() - i)));
        for (const auto& r : decoded) {
            const auto& attn = r.attention;
            if (attn.rows() == 0) {
                out.push_back(attn.hands.front());
                continue;
            }
            out.push_back(detect_signing_hand(layer_average_attention(attn), attn.hand_membership, attn.hands));
        }
    }
    return out;
}

double measure_hand_detection(const recognizer::Recognizer& model, std::span<const PoseSequence> data)
{
    std::vector<PoseSequence> labelled;
    for (const auto& seq : data) {
        if (seq.signing_hand) labelled.push_back(seq);
    }
    if (labelled.empty()) throw DataError("hand detection: no sequence carries a signing hand");
    std::vector<HandIdentity> truth;
    for (const auto& seq : labelled) truth.push_back(*seq.signing_hand);
    const auto predicted = detect_hands(model, labelled);
    return hand_detection_accuracy(predicted, truth);
}

std::vector<double> default_noise_levels()
{
    std::vector<double> out;
    for (int i = 0; i <= 10; ++i) out.push_back(0.01 * i);
    return out;
}

std::vector<NoisePoint> noise_sweep(const recognizer::Recognizer& model, std::span<const PoseSequence> data,
                                    std::span<const double> sigmas, std::uint64_t seed)
{
    std::vector<NoisePoint> out;
    for (double sigma : sigmas) {
        if (sigma < 0.0) throw ConfigError("noise sweep: sigma must be non-negative");
        std::vector<PoseSequence> noisy;
        noisy.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            Rng rng(mix64(fork_seed(seed, "noise_sweep") + i));
            noisy.push_back(datagen::perturb_poses(data[i], sigma, rng));
        }
        const auto preds = recognizer::recognize(model, noisy);
        out.push_back({sigma, letter_accuracy(preds)});
    }
    return out;
}

nlohmann::json to_json(const EvalReport& r)
{
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& p : r.noise_sweep) sweep.push_back({{"sigma", p.sigma}, {"letter_acc", p.letter_acc}});
    return {{"letter_acc", r.letter_acc},
            {"top1", r.top1},
            {"hand_det_acc", opt(r.hand_det_acc)},
            {"iv_acc", opt(r.iv_acc)},
            {"oov_acc", opt(r.oov_acc)},
            {"samples", r.samples},
            {"empty_references", r.empty_references},
            {"speed", r.speed ? to_json(*r.speed) : nlohmann::json(nullptr)},
            {"noise_sweep", sweep}};
}

EvalReport score_predictions(std::span<const Prediction> pairs, const std::set<std::string>* train_vocabulary)
{
    EvalReport report;
    report.samples = pairs.size();
    report.empty_references = count_empty_references(pairs);
    report.letter_acc = letter_accuracy(pairs);
    report.top1 = top1_accuracy(pairs);
    if (train_vocabulary) {
        std::vector<Prediction> iv, oov;
        for (const auto& p : pairs) (train_vocabulary->count(p.reference) ? iv : oov).push_back(p);
        if (!iv.empty()) report.iv_acc = letter_accuracy(iv);
        if (!oov.empty()) report.oov_acc = letter_accuracy(oov);
    }
    return report;
}

}  // namespace fslab::eval
