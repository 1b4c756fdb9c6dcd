#include "fslab/recognizer/recognizer.hpp"

#include "fslab/core/errors.hpp"
#include "fslab/nn/checkpoint.hpp"
#include "fslab/nn/ops.hpp"

#include <algorithm>

namespace fslab::recognizer {

void RecognizerConfig::validate() const
{
    if (enc_layers < 1 || dec_layers < 1) throw ConfigError("recognizer: need at least one encoder and decoder layer");
    if (hidden < 2 || heads < 1 || hidden % heads != 0) throw ConfigError("recognizer: hidden must be divisible by heads");
    if (ffn < 1 || head_hidden < 1) throw ConfigError("recognizer: feed-forward and head widths must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("recognizer: dropout must lie in [0, 1)");
    if (pose_dim % kJoints != 0 || (pose_dim / kJoints != 2 && pose_dim / kJoints != 3)) {
        throw ConfigError("recognizer: pose_dim must be 21 joints x 2 or 3 coordinates");
    }
    if (max_decode_len < 1) throw ConfigError("recognizer: max_decode_len must be positive");
    if (token_dropout < 0.0 || token_dropout >= 1.0) throw ConfigError("recognizer: token_dropout must lie in [0, 1)");
}

nlohmann::json to_json(const RecognizerConfig& cfg)
{
    return {{"enc_layers", cfg.enc_layers},
            {"dec_layers", cfg.dec_layers},
            {"hidden", cfg.hidden},
            {"ffn", cfg.ffn},
            {"heads", cfg.heads},
            {"dropout", cfg.dropout},
            {"activation", cfg.activation == nn::Activation::gelu ? "gelu" : "relu"},
            {"pose_dim", cfg.pose_dim},
            {"head_hidden", cfg.head_hidden},
            {"max_decode_len", cfg.max_decode_len},
            {"positional", cfg.positional == PositionalMode::dual_level ? "dual_level" : "standard"},
            {"pre_norm", cfg.pre_norm},
            {"token_dropout", cfg.token_dropout}};
}

namespace {

std::string choice(const nlohmann::json& j, const char* key, std::initializer_list<const char*> allowed)
{
    const std::string v = j.at(key);
    for (const char* a : allowed) {
        if (v == a) return v;
    }
    throw ConfigError(std::string("recognizer: unknown ") + key + " '" + v + "'");
}

}  // namespace

RecognizerConfig recognizer_config_from_json(const nlohmann::json& j)
{
    RecognizerConfig cfg;
    cfg.enc_layers = j.at("enc_layers");
    cfg.dec_layers = j.at("dec_layers");
    cfg.hidden = j.at("hidden");
    cfg.ffn = j.at("ffn");
    cfg.heads = j.at("heads");
    cfg.dropout = j.at("dropout");
    cfg.activation = choice(j, "activation", {"gelu", "relu"}) == "gelu" ? nn::Activation::gelu : nn::Activation::relu;
    cfg.pose_dim = j.at("pose_dim");
    cfg.head_hidden = j.at("head_hidden");
    cfg.max_decode_len = j.at("max_decode_len");
    cfg.positional = choice(j, "positional", {"dual_level", "standard"}) == "dual_level" ? PositionalMode::dual_level : PositionalMode::standard;
    cfg.pre_norm = j.at("pre_norm");
    cfg.token_dropout = j.at("token_dropout");
    cfg.validate();
    return cfg;
}

nn::Vec dual_level_encoding(int frame_index, int hand_index, int dim)
{
    nn::Vec hand = nn::sinusoid(hand_index, dim);
    for (int i = 0; i + 1 < dim; i += 2) std::swap(hand(i), hand(i + 1));
    return hand + nn::sinusoid(frame_index, dim);
}

Recognizer::Recognizer(const RecognizerConfig& config, const Charset& charset, std::uint64_t seed)
    : config_(config), charset_(charset)
{
    config_.validate();
    Rng rng(seed);
    const int h = config_.hidden;
    embed1_ = nn::Linear(config_.pose_dim, h, rng);
    embed_norm1_ = nn::LayerNorm(h);
    embed2_ = nn::Linear(h, h, rng);
    embed_norm2_ = nn::LayerNorm(h);
    for (int i = 0; i < config_.enc_layers; ++i) {
        encoder_.emplace_back(h, config_.ffn, config_.heads, config_.dropout, config_.activation, rng,
                              config_.pre_norm);
    }
    encoder_norm_ = nn::LayerNorm(h);
    char_embed_ = nn::Embedding(charset_.size() + 1, h, rng);  // + pad row
    for (int i = 0; i < config_.dec_layers; ++i) {
        decoder_.emplace_back(h, config_.ffn, config_.heads, config_.dropout, config_.activation, rng,
                              config_.pre_norm);
    }
    decoder_norm_ = nn::LayerNorm(h);
    head1_ = nn::Linear(h, config_.head_hidden, rng);
    head2_ = nn::Linear(config_.head_hidden, charset_.size(), rng);

    embed1_.collect(params_, "embed.linear1");
    embed_norm1_.collect(params_, "embed.norm1");
    embed2_.collect(params_, "embed.linear2");
    embed_norm2_.collect(params_, "embed.norm2");
    for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].collect(params_, "encoder." + std::to_string(i));
    encoder_norm_.collect(params_, "encoder.norm");
    char_embed_.collect(params_, "decoder.char_embed");
    for (std::size_t i = 0; i < decoder_.size(); ++i) decoder_[i].collect(params_, "decoder." + std::to_string(i));
    decoder_norm_.collect(params_, "decoder.norm");
    head1_.collect(params_, "head.linear1");
    head2_.collect(params_, "head.linear2");
}

nn::Var Recognizer::embed_poses(const Matrix& tokens) const
{
    if (tokens.cols() != config_.pose_dim) {
        throw DataError("pose tokens have " + std::to_string(tokens.cols()) + " values, recognizer expects " +
                        std::to_string(config_.pose_dim));
    }
    return embed_poses(nn::constant(tokens));
}

nn::Var Recognizer::embed_poses(const nn::Var& tokens) const
{
    nn::Var x = nn::relu(embed_norm1_(embed1_(tokens)));
    return nn::relu(embed_norm2_(embed2_(x)));
}

Matrix Recognizer::positional_codes(const AssembledTokens& tokens) const
{
    const int h = config_.hidden;
    Matrix pe(tokens.total(), h);
    for (int t = 0; t < tokens.total(); ++t) {
        if (config_.positional == PositionalMode::dual_level) {
            const int hand = tokens.hands[static_cast<std::size_t>(tokens.hand_of_token[static_cast<std::size_t>(t)])]
                                 .hand_index();
            pe.row(t) = dual_level_encoding(tokens.frame_index[static_cast<std::size_t>(t)], hand, h).transpose();
        } else {
            pe.row(t) = nn::sinusoid(t, h).transpose();
        }
    }
    return pe;
}

Recognizer::Encoded Recognizer::encode(std::span<const PoseSequence> batch, const nn::Ctx& ctx) const
{
    Encoded enc;
    Eigen::Index total = 0;
    for (const auto& seq : batch) {
        enc.tokens.push_back(assemble_tokens(seq));
        const auto& tk = enc.tokens.back();
        if (tk.total() == 0) throw DataError("empty pose sequence");
        enc.segments.push_back({total, tk.total(), total, tk.total()});
        total += tk.total();
    }
    Matrix packed(total, config_.pose_dim);
    Matrix pe(total, config_.hidden);
    for (std::size_t b = 0; b < enc.tokens.size(); ++b) {
        const auto& tk = enc.tokens[b];
        if (tk.tokens.cols() != config_.pose_dim) {
            throw DataError(batch[b].id + ": pose tokens have " + std::to_string(tk.tokens.cols()) +
                            " values, recognizer expects " + std::to_string(config_.pose_dim));
        }
        packed.middleRows(enc.segments[b].q_offset, tk.total()) = tk.tokens;
        pe.middleRows(enc.segments[b].q_offset, tk.total()) = positional_codes(tk);
    }
    enc.input = ctx.input_grad ? nn::leaf(std::move(packed)) : nn::constant(std::move(packed));
    nn::Var x = nn::dropout(nn::add_const(embed_poses(enc.input), pe), config_.dropout, ctx.rng, ctx.training);
    for (const auto& layer : encoder_) x = layer(x, enc.segments, ctx);
    enc.memory = encoder_norm_(x);
    return enc;
}

nn::Var Recognizer::decode(const Encoded& enc, std::span<const std::vector<int>> inputs,
                           std::span<const std::size_t> which, const nn::Ctx& ctx,
                           std::vector<nn::Var>* cross_probs, std::vector<Eigen::Index>* offsets) const
{
    std::vector<int> ids;
    std::vector<int> positions;
    std::vector<nn::Segment> self_segments;
    std::vector<nn::Segment> cross_segments;
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < which.size(); ++i) {
        const auto& in = inputs[i];
        const auto& mem = enc.segments[which[i]];
        self_segments.push_back({off, static_cast<Eigen::Index>(in.size()), off, static_cast<Eigen::Index>(in.size())});
        cross_segments.push_back({off, static_cast<Eigen::Index>(in.size()), mem.q_offset, mem.q_len});
        if (offsets) offsets->push_back(off);
        for (std::size_t p = 0; p < in.size(); ++p) {
            ids.push_back(in[p]);
            positions.push_back(static_cast<int>(p));
        }
        off += static_cast<Eigen::Index>(in.size());
    }
    nn::Var y = nn::add_const(char_embed_(ids), nn::sinusoid_table(positions, config_.hidden));
    y = nn::dropout(y, config_.dropout, ctx.rng, ctx.training);
    for (const auto& layer : decoder_) {
        nn::Var probs;
        y = layer(y, enc.memory, self_segments, cross_segments, ctx, &probs);
        if (cross_probs) cross_probs->push_back(probs);
    }
    return head2_(nn::relu(head1_(decoder_norm_(y))));
}

TrainForward Recognizer::forward_train(std::span<const PoseSequence> batch, const nn::Ctx& ctx) const
{
    TrainForward out;
    Encoded enc = encode(batch, ctx);
    std::vector<std::vector<int>> inputs;
    std::vector<std::size_t> which;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::vector<int> ids = charset_.encode(batch[b].word);
        out.word_length.push_back(static_cast<int>(ids.size()) - 2);
        out.targets.insert(out.targets.end(), ids.begin() + 1, ids.end());
        ids.pop_back();
        if (ctx.training && config_.token_dropout > 0.0 && ctx.rng != nullptr) {
            std::bernoulli_distribution drop(config_.token_dropout);
            for (std::size_t p = 1; p < ids.size(); ++p) {
                if (drop(*ctx.rng)) ids[p] = charset_.pad_id();
            }
        }
        inputs.push_back(std::move(ids));
        which.push_back(b);
    }
    out.logits = decode(enc, inputs, which, ctx, &out.cross_probs, &out.row_offset);
    out.tokens = std::move(enc.tokens);
    out.pose_input = enc.input;
    for (const auto& s : enc.segments) out.token_offset.push_back(s.q_offset);
    return out;
}

CrossAttentionMap Recognizer::attention_of(const TrainForward& fwd, std::size_t b, bool letters_only)
{
    CrossAttentionMap map;
    const auto& tk = fwd.tokens[b];
    const Eigen::Index rows = fwd.word_length[b] + (letters_only ? 0 : 1);
    for (const auto& p : fwd.cross_probs) {
        map.layers.push_back(p.value().block(fwd.row_offset[b], 0, rows, tk.total()));
    }
    map.frame_index = tk.frame_index;
    map.hand_membership = tk.hand_membership;
    map.hands = tk.hands;
    return map;
}

Recognizer::SampleForward Recognizer::forward_sample(const PoseSequence& seq) const
{
    nn::NoGradGuard guard;
    const nn::Ctx ctx;
    auto fwd = forward_train(std::span<const PoseSequence>(&seq, 1), ctx);
    return {fwd.logits.value(), fwd.targets, attention_of(fwd, 0, false)};
}

DecodeResult Recognizer::greedy_decode(const PoseSequence& seq, int max_len) const
{
    return greedy_decode_batch(std::span<const PoseSequence>(&seq, 1), max_len).front();
}

std::vector<DecodeResult> Recognizer::greedy_decode_batch(std::span<const PoseSequence> batch, int max_len) const
{
    if (max_len < 0) max_len = config_.max_decode_len;
    nn::NoGradGuard guard;
    const nn::Ctx ctx;
    Encoded enc = encode(batch, ctx);

    std::vector<DecodeResult> results(batch.size());
    std::vector<std::vector<int>> prefixes(batch.size(), std::vector<int>{charset_.start_id()});
    std::vector<std::vector<Matrix>> rows(batch.size(), std::vector<Matrix>(decoder_.size()));
    std::vector<std::size_t> active(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) active[b] = b;

    while (!active.empty()) {
        std::vector<std::vector<int>> inputs;
        for (std::size_t b : active) inputs.push_back(prefixes[b]);
        std::vector<nn::Var> probs;
        std::vector<Eigen::Index> offsets;
        nn::Var logits = decode(enc, inputs, active, ctx, &probs, &offsets);

        std::vector<std::size_t> still;
        for (std::size_t i = 0; i < active.size(); ++i) {
            const std::size_t b = active[i];
            const Eigen::Index last = offsets[i] + static_cast<Eigen::Index>(inputs[i].size()) - 1;
            int best = -1;
            for (int c = 0; c < charset_.size(); ++c) {
                if (c == charset_.start_id()) continue;
                if (best < 0 || logits.value()(last, c) > logits.value()(last, best)) best = c;
            }
            auto& res = results[b];
            if (best == charset_.end_id()) continue;
            if (static_cast<int>(res.letter_ids.size()) >= max_len) {
                res.truncated = true;
                continue;
            }
            res.letter_ids.push_back(best);
            const Eigen::Index tokens = enc.tokens[b].total();
            for (std::size_t l = 0; l < decoder_.size(); ++l) {
                Matrix& acc = rows[b][l];
                acc.conservativeResize(acc.rows() + 1, tokens);
                acc.row(acc.rows() - 1) = probs[l].value().block(last, 0, 1, tokens);
            }
            prefixes[b].push_back(best);
            still.push_back(b);
        }
        active = std::move(still);
    }

    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto& res = results[b];
        const auto& tk = enc.tokens[b];
        res.word = charset_.decode(res.letter_ids);
        for (std::size_t l = 0; l < decoder_.size(); ++l) {
            res.attention.layers.push_back(rows[b][l].rows() ? rows[b][l] : Matrix::Zero(0, tk.total()));
        }
        res.attention.frame_index = tk.frame_index;
        res.attention.hand_membership = tk.hand_membership;
        res.attention.hands = tk.hands;
    }
    return results;
}

Matrix Recognizer::encoder_features(const PoseSequence& seq) const
{
    nn::NoGradGuard guard;
    return encode(std::span<const PoseSequence>(&seq, 1), nn::Ctx{}).memory.value();
}

void Recognizer::save(const std::filesystem::path& path) const
{
    nlohmann::json cfg = to_json(config_);
    cfg["punctuation"] = std::string(charset_.punctuation());
    nn::save_checkpoint(path, {"recognizer", cfg, charset_.hash()}, params_);
}

Recognizer Recognizer::load(const std::filesystem::path& path, const Charset& charset)
{
    const auto header = nn::read_checkpoint_header(path);
    if (header.kind != "recognizer") throw CheckpointMismatch(path.string() + " is a " + header.kind + " checkpoint");
    if (header.charset_hash != charset.hash()) {
        throw CheckpointMismatch("charset hash mismatch between checkpoint and current charset");
    }
    Recognizer model(recognizer_config_from_json(header.config), charset, 0);
    nn::load_checkpoint_params(path, model.params_);
    return model;
}

}  // namespace fslab::recognizer
