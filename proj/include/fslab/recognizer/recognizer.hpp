#pragma once

#include "fslab/core/charset.hpp"
#include "fslab/core/pose.hpp"
#include "fslab/nn/layers.hpp"
#include "fslab/recognizer/attention_map.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fslab::recognizer {

enum class PositionalMode {
    dual_level,  // hand-identity code + frame code
    standard,    // one code per token position in the concatenated sequence
};

struct RecognizerConfig {
    int enc_layers = 3;
    int dec_layers = 3;
    int hidden = 256;
    int ffn = 2048;
    int heads = 8;
    double dropout = 0.1;
    nn::Activation activation = nn::Activation::gelu;
    int pose_dim = 42;
    int head_hidden = 128;
    int max_decode_len = 32;
    PositionalMode positional = PositionalMode::dual_level;
    bool pre_norm = false;
    double token_dropout = 0.0;  // training-time chance of replacing a decoder input letter by pad

    void validate() const;
};

nlohmann::json to_json(const RecognizerConfig& cfg);
RecognizerConfig recognizer_config_from_json(const nlohmann::json& j);

/// Sum of the sinusoidal hand-identity code and the sinusoidal frame code.
/// The hand code swaps the sin and cos columns, so (frame, hand) and
/// (hand, frame) do not collide.
nn::Vec dual_level_encoding(int frame_index, int hand_index, int dim);

/// Packed teacher-forced forward pass over a batch.
struct TrainForward {
    nn::Var logits;                       // [sum(|W_b|+1) x charset size]
    std::vector<int> targets;             // letters then <end>, per sample
    std::vector<nn::Var> cross_probs;     // per decoder layer, packed [sum rows x max T]
    std::vector<AssembledTokens> tokens;  // per sample
    std::vector<Eigen::Index> row_offset; // first decoder row of each sample
    std::vector<int> word_length;         // |W_b|
    nn::Var pose_input;                   // packed tokens [sum T_total x pose_dim]
    std::vector<Eigen::Index> token_offset;  // first packed token of each sample
};

struct DecodeResult {
    std::string word;
    std::vector<int> letter_ids;
    CrossAttentionMap attention;  // one row per emitted letter
    bool truncated = false;
};

class Recognizer {
public:
    Recognizer(const RecognizerConfig& config, const Charset& charset, std::uint64_t seed);

    const RecognizerConfig& config() const { return config_; }
    const Charset& charset() const { return charset_; }
    const nn::ParamList& params() const { return params_; }

    /// Linear-LayerNorm-ReLU twice: [T x pose_dim] -> [T x hidden].
    nn::Var embed_poses(const Matrix& tokens) const;
    nn::Var embed_poses(const nn::Var& tokens) const;

    TrainForward forward_train(std::span<const PoseSequence> batch, const nn::Ctx& ctx) const;

    /// Single-sample teacher-forced pass in eval mode.
    struct SampleForward {
        Matrix logits;             // [|W|+1 x charset size]
        std::vector<int> targets;  // letters then <end>
        CrossAttentionMap attention;  // [L_d x (|W|+1) x T_total]
    };
    SampleForward forward_sample(const PoseSequence& seq) const;

    DecodeResult greedy_decode(const PoseSequence& seq, int max_len = -1) const;
    std::vector<DecodeResult> greedy_decode_batch(std::span<const PoseSequence> batch, int max_len = -1) const;

    /// Encoder output (eval mode), token order of assemble_tokens.
    Matrix encoder_features(const PoseSequence& seq) const;

    /// Extracts sample `b` of a packed forward as a standalone attention map.
    static CrossAttentionMap attention_of(const TrainForward& fwd, std::size_t b, bool letters_only);

    void save(const std::filesystem::path& path) const;
    static Recognizer load(const std::filesystem::path& path, const Charset& charset);

private:
    struct Encoded {
        nn::Var input;
        nn::Var memory;
        std::vector<nn::Segment> segments;
        std::vector<AssembledTokens> tokens;
    };
    Encoded encode(std::span<const PoseSequence> batch, const nn::Ctx& ctx) const;
    /// Decoder over packed id sequences; returns logits and per-layer cross probabilities.
    nn::Var decode(const Encoded& enc, std::span<const std::vector<int>> inputs, std::span<const std::size_t> which,
                   const nn::Ctx& ctx, std::vector<nn::Var>* cross_probs, std::vector<Eigen::Index>* offsets) const;
    Matrix positional_codes(const AssembledTokens& tokens) const;

    RecognizerConfig config_;
    Charset charset_;
    nn::Linear embed1_, embed2_;
    nn::LayerNorm embed_norm1_, embed_norm2_;
    std::vector<nn::EncoderLayer> encoder_;
    nn::LayerNorm encoder_norm_;
    nn::Embedding char_embed_;
    std::vector<nn::DecoderLayer> decoder_;
    nn::LayerNorm decoder_norm_;
    nn::Linear head1_, head2_;
    nn::ParamList params_;
};

}  // namespace fslab::recognizer
