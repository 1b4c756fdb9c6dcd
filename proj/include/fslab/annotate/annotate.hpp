#pragma once

#include "fslab/core/charset.hpp"
#include "fslab/core/pose.hpp"
#include "fslab/nn/layers.hpp"
#include "fslab/recognizer/recognizer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace fslab::annotate {

/// 0.5 * mean of the 2nd-4th largest values. Shorter rows drop only the
/// maximum; a single value is halved.
double claim_threshold(std::span<const double> row);

/// Token-level labels for one [|W| x T_total] attention matrix: a token
/// claimed by exactly one letter row takes that letter, anything else blank.
/// Zero attention never claims a token, even when the threshold is zero.
std::vector<int> coarse_token_labels(const Matrix& attention, std::span<const int> letters, const Charset& charset);

/// Splits token labels back into one FrameLabels per hand column.
std::vector<FrameLabels> split_by_hand(std::span<const int> token_labels, const AssembledTokens& tokens);

/// Coarse annotation of an averaged attention map, one FrameLabels per hand
/// column of `tokens`.
std::vector<FrameLabels> coarse_annotate(const Matrix& attention, const AssembledTokens& tokens,
                                         std::span<const int> letters, const Charset& charset);

/// Labels of every hand of a sequence, hand columns in assemble_tokens order.
struct SequenceLabels {
    std::vector<HandIdentity> hands;
    std::vector<FrameLabels> labels;
    std::vector<int> token_labels;

    /// Labels of `who`, or of the first hand when absent.
    const FrameLabels& of(const std::optional<HandIdentity>& who) const;
};

/// Teacher-forced attention on the ground-truth word, renormalized and
/// averaged over decoder layers, then thresholded.
SequenceLabels coarse_annotate_sequence(const recognizer::Recognizer& model, const PoseSequence& seq);

/// Fraction of frames whose label matches.
double frame_accuracy(const FrameLabels& predicted, const FrameLabels& truth);

struct RefinerConfig {
    int input = 256;  // recognizer hidden size
    int hidden = 256;
    double dropout = 0.1;
    double blank_weight = 0.1;
    double lr = 1e-4;
    int epochs = 10;
    int batch_size = 16;  // sequences per step

    void validate() const;
};

nlohmann::json to_json(const RefinerConfig& cfg);
RefinerConfig refiner_config_from_json(const nlohmann::json& j);

/// Frame classifier over frozen encoder features:
/// Linear, LayerNorm, ReLU, Dropout, Linear to charset.size() classes.
/// Letters keep their ids as classes; blank uses the start-token slot and the
/// end-token slot is never predicted.
class Refiner {
public:
    Refiner(const RefinerConfig& config, const Charset& charset, std::uint64_t seed);

    const RefinerConfig& config() const { return config_; }
    const Charset& charset() const { return charset_; }
    const nn::ParamList& params() const { return params_; }
    int classes() const { return charset_.size(); }
    int blank_class() const { return charset_.start_id(); }

    int class_of(int label) const;
    int label_of(int cls) const;

    /// [T x input] -> logits [T x classes]
    nn::Var forward(const Matrix& features, const nn::Ctx& ctx) const;
    /// Per-token labels (letters or blank), eval mode.
    std::vector<int> predict(const Matrix& features) const;

    void save(const std::filesystem::path& path) const;
    static Refiner load(const std::filesystem::path& path, const Charset& charset);

private:
    RefinerConfig config_;
    Charset charset_;
    nn::Linear fc1_, fc2_;
    nn::LayerNorm norm_;
    nn::ParamList params_;
};

struct RefinerExample {
    Matrix features;          // [T_total x input]
    std::vector<int> labels;  // per token: letter id, blank id, or pad id (ignored)
};

/// Weighted cross-entropy (blank weight from the config, letters 1) divided
/// by the number of non-pad tokens.
nn::Var refiner_loss(const Refiner& refiner, std::span<const RefinerExample> batch, const nn::Ctx& ctx);

std::vector<double> train_refiner(Refiner& refiner, std::span<const RefinerExample> examples, std::uint64_t seed,
                                  const std::function<void(int epoch, double loss)>& on_epoch = {});

/// Encoder features plus coarse labels for every token of `seq`.
RefinerExample make_refiner_example(const recognizer::Recognizer& model, const PoseSequence& seq);

/// Refined labels for every hand of a sequence.
SequenceLabels refine_annotate(const recognizer::Recognizer& model, const Refiner& refiner, const PoseSequence& seq);

}  // namespace fslab::annotate
