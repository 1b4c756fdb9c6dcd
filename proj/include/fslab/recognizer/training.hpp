#pragma once

#include "fslab/eval/metrics.hpp"
#include "fslab/losses/losses.hpp"
#include "fslab/recognizer/recognizer.hpp"

#include <functional>
#include <optional>

namespace fslab::recognizer {

struct TrainConfig {
    int epochs = 20;
    double lr = 1e-4;
    double lr_decay = 0.1;
    int decay_every = 10;
    int batch_size = 64;
    bool use_sf = true;
    bool use_ma = true;
    int aux_warmup = 0;  // leading epochs trained on cross-entropy alone
    losses::LossWeights weights;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochLog {
    int epoch = 0;
    double ce = 0.0;
    double sf = 0.0;
    double ma = 0.0;
    double total = 0.0;
    std::optional<double> dev_letter_acc;
};

nlohmann::json to_json(const EpochLog& log);

/// Seeded, single-threaded training: fixed shuffle order, seeded dropout.
std::vector<EpochLog> train_recognizer(Recognizer& model, std::span<const PoseSequence> train,
                                       std::span<const PoseSequence> dev, const TrainConfig& config,
                                       std::uint64_t seed,
                                       const std::function<void(const EpochLog&)>& on_epoch = {});

/// Greedy-decodes every sequence (batched) and pairs it with its reference word.
std::vector<eval::Prediction> recognize(const Recognizer& model, std::span<const PoseSequence> data,
                                        int batch_size = 32);

/// One training step's losses for a batch; exposed for gradient checks.
struct BatchLoss {
    nn::Var total;
    double ce = 0.0;
    double sf = 0.0;
    double ma = 0.0;
    nn::Var pose_input;                      // see TrainForward
    std::vector<Eigen::Index> token_offset;
};
BatchLoss batch_loss(const Recognizer& model, std::span<const PoseSequence> batch, const TrainConfig& config,
                     const nn::Ctx& ctx);

}  // namespace fslab::recognizer
