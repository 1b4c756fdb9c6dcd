#include "fslab/annotate/annotate.hpp"

#include "fslab/core/errors.hpp"
#include "fslab/nn/checkpoint.hpp"
#include "fslab/nn/optim.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace fslab::annotate {

double claim_threshold(std::span<const double> row)
{
    if (row.empty()) return 0.0;
    std::vector<double> v(row.begin(), row.end());
    std::sort(v.begin(), v.end(), std::greater<>());
    if (v.size() == 1) return 0.5 * v[0];
    const std::size_t end = std::min<std::size_t>(v.size(), 4);
    const double sum = std::accumulate(v.begin() + 1, v.begin() + static_cast<std::ptrdiff_t>(end), 0.0);
    return 0.5 * sum / static_cast<double>(end - 1);
}

std::vector<int> coarse_token_labels(const Matrix& attention, std::span<const int> letters, const Charset& charset)
{
    if (static_cast<Eigen::Index>(letters.size()) != attention.rows()) {
        throw DataError("coarse annotation: one attention row per letter required");
    }
    const Eigen::Index tokens = attention.cols();
    std::vector<int> claims(static_cast<std::size_t>(tokens), 0);
    std::vector<int> owner(static_cast<std::size_t>(tokens), charset.blank_id());
    for (Eigen::Index i = 0; i < attention.rows(); ++i) {
        const Eigen::RowVectorXd row = attention.row(i);
        const double theta = claim_threshold(std::span<const double>(row.data(), static_cast<std::size_t>(tokens)));
        for (Eigen::Index t = 0; t < tokens; ++t) {
            if (row(t) >= theta && row(t) > 0.0) {
                ++claims[static_cast<std::size_t>(t)];
                owner[static_cast<std::size_t>(t)] = letters[static_cast<std::size_t>(i)];
            }
        }
    }
    for (std::size_t t = 0; t < owner.size(); ++t) {
        if (claims[t] != 1) owner[t] = charset.blank_id();
    }
    return owner;
}

std::vector<FrameLabels> split_by_hand(std::span<const int> token_labels, const AssembledTokens& tokens)
{
    if (static_cast<int>(token_labels.size()) != tokens.total()) {
        throw DataError("token label count differs from token count");
    }
    std::vector<FrameLabels> out(static_cast<std::size_t>(tokens.hand_count()));
    for (int t = 0; t < tokens.total(); ++t) {
        auto& labels = out[static_cast<std::size_t>(tokens.hand_of_token[static_cast<std::size_t>(t)])].labels;
        const auto f = static_cast<std::size_t>(tokens.frame_index[static_cast<std::size_t>(t)]);
        if (labels.size() <= f) labels.resize(f + 1);
        labels[f] = token_labels[static_cast<std::size_t>(t)];
    }
    return out;
}

std::vector<FrameLabels> coarse_annotate(const Matrix& attention, const AssembledTokens& tokens,
                                         std::span<const int> letters, const Charset& charset)
{
    return split_by_hand(coarse_token_labels(attention, letters, charset), tokens);
}

const FrameLabels& SequenceLabels::of(const std::optional<HandIdentity>& who) const
{
    if (labels.empty()) throw DataError("no hand labels");
    if (who) {
        for (std::size_t i = 0; i < hands.size(); ++i) {
            if (hands[i] == *who) return labels[i];
        }
    }
    return labels.front();
}

SequenceLabels coarse_annotate_sequence(const recognizer::Recognizer& model, const PoseSequence& seq)
{
    const auto fwd = model.forward_sample(seq);
    CrossAttentionMap attn = fwd.attention;
    const int letters = static_cast<int>(fwd.targets.size()) - 1;
    for (auto& layer : attn.layers) layer = layer.topRows(letters).eval();
    const Matrix averaged = layer_average_attention(attn);
    const AssembledTokens tokens = assemble_tokens(seq);
    SequenceLabels out;
    out.hands = tokens.hands;
    out.token_labels = coarse_token_labels(
        averaged, std::span<const int>(fwd.targets.data(), static_cast<std::size_t>(letters)), model.charset());
    out.labels = split_by_hand(out.token_labels, tokens);
    return out;
}

double frame_accuracy(const FrameLabels& predicted, const FrameLabels& truth)
{
    if (predicted.labels.size() != truth.labels.size()) throw DataError("frame label lengths differ");
    if (truth.labels.empty()) return 1.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.labels.size(); ++i) hits += predicted.labels[i] == truth.labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.labels.size());
}

void RefinerConfig::validate() const
{
    if (input < 1 || hidden < 1) throw ConfigError("refiner: widths must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("refiner: dropout must lie in [0, 1)");
    if (blank_weight < 0.0) throw ConfigError("refiner: blank_weight must be non-negative");
    if (lr <= 0.0) throw ConfigError("refiner: lr must be positive");
    if (epochs < 0 || batch_size < 1) throw ConfigError("refiner: epochs and batch_size must be positive");
}

nlohmann::json to_json(const RefinerConfig& cfg)
{
    return {{"input", cfg.input},   {"hidden", cfg.hidden}, {"dropout", cfg.dropout},
            {"blank_weight", cfg.blank_weight}, {"lr", cfg.lr}, {"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size}};
}

RefinerConfig refiner_config_from_json(const nlohmann::json& j)
{
    RefinerConfig cfg;
    cfg.input = j.at("input");
    cfg.hidden = j.at("hidden");
    cfg.dropout = j.at("dropout");
    cfg.blank_weight = j.at("blank_weight");
    cfg.lr = j.at("lr");
    cfg.epochs = j.at("epochs");
    cfg.batch_size = j.at("batch_size");
    cfg.validate();
    return cfg;
}

Refiner::Refiner(const RefinerConfig& config, const Charset& charset, std::uint64_t seed)
    : config_(config), charset_(charset)
{
    config_.validate();
    Rng rng = make_rng(seed, "refiner.init");
    fc1_ = nn::Linear(config_.input, config_.hidden, rng);
    norm_ = nn::LayerNorm(config_.hidden);
    fc2_ = nn::Linear(config_.hidden, classes(), rng);
    fc1_.collect(params_, "fc1");
    norm_.collect(params_, "norm");
    fc2_.collect(params_, "fc2");
}

int Refiner::class_of(int label) const
{
    if (charset_.is_letter(label)) return label;
    if (label == charset_.blank_id()) return blank_class();
    if (label == charset_.pad_id()) return label;
    throw DataError("refiner: label is neither a letter nor blank");
}

int Refiner::label_of(int cls) const
{
    if (charset_.is_letter(cls)) return cls;
    return charset_.blank_id();
}

nn::Var Refiner::forward(const Matrix& features, const nn::Ctx& ctx) const
{
    if (features.cols() != config_.input) {
        throw DataError("refiner: features have " + std::to_string(features.cols()) + " columns, expected " +
                        std::to_string(config_.input));
    }
    nn::Var h = nn::relu(norm_(fc1_(nn::constant(features))));
    return fc2_(nn::dropout(h, config_.dropout, ctx.rng, ctx.training));
}

std::vector<int> Refiner::predict(const Matrix& features) const
{
    nn::NoGradGuard guard;
    const Matrix logits = forward(features, nn::Ctx{}).value();
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        int best = 0;
        for (int c = 1; c < classes(); ++c) {
            if (c == charset_.end_id()) continue;
            if (logits(r, c) > logits(r, best)) best = c;
        }
        out[static_cast<std::size_t>(r)] = label_of(best);
    }
    return out;
}

void Refiner::save(const std::filesystem::path& path) const
{
    nlohmann::json cfg = to_json(config_);
    cfg["punctuation"] = std::string(charset_.punctuation());
    nn::save_checkpoint(path, {"refiner", cfg, charset_.hash()}, params_);
}

Refiner Refiner::load(const std::filesystem::path& path, const Charset& charset)
{
    const auto header = nn::read_checkpoint_header(path);
    if (header.kind != "refiner") throw CheckpointMismatch(path.string() + " is a " + header.kind + " checkpoint");
    if (header.charset_hash != charset.hash()) {
        throw CheckpointMismatch("charset hash mismatch between checkpoint and current charset");
    }
    Refiner model(refiner_config_from_json(header.config), charset, 0);
    nn::load_checkpoint_params(path, model.params_);
    return model;
}

nn::Var refiner_loss(const Refiner& refiner, std::span<const RefinerExample> batch, const nn::Ctx& ctx)
{
    Eigen::Index rows = 0;
    for (const auto& ex : batch) {
        if (static_cast<Eigen::Index>(ex.labels.size()) != ex.features.rows()) {
            throw DataError("refiner: one label per feature row required");
        }
        rows += ex.features.rows();
    }
    if (rows == 0) throw DataError("refiner: empty label set");
    Matrix features(rows, refiner.config().input);
    std::vector<int> targets;
    targets.reserve(static_cast<std::size_t>(rows));
    Eigen::Index r = 0;
    for (const auto& ex : batch) {
        features.middleRows(r, ex.features.rows()) = ex.features;
        r += ex.features.rows();
        for (int l : ex.labels) targets.push_back(refiner.class_of(l));
    }
    std::vector<double> weights(static_cast<std::size_t>(refiner.classes()), 1.0);
    weights[static_cast<std::size_t>(refiner.blank_class())] = refiner.config().blank_weight;
    const int pad = refiner.charset().pad_id();
    if (std::all_of(targets.begin(), targets.end(), [pad](int t) { return t == pad; })) {
        throw DataError("refiner: empty label set");
    }
    return nn::cross_entropy(refiner.forward(features, ctx), targets, pad, weights);
}

std::vector<double> train_refiner(Refiner& refiner, std::span<const RefinerExample> examples, std::uint64_t seed,
                                  const std::function<void(int epoch, double loss)>& on_epoch)
{
    const auto& cfg = refiner.config();
    if (examples.empty()) throw DataError("refiner: empty label set");
    Rng order_rng = make_rng(seed, "refiner.order");
    Rng dropout_rng = make_rng(seed, "refiner.dropout");
    nn::Adam adam(refiner.params(), cfg.lr);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> losses;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<RefinerExample> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
            nn::Var loss = refiner_loss(refiner, batch, nn::Ctx{true, &dropout_rng});
            refiner.params().zero_grad();
            nn::backward(loss);
            adam.step();
            total += loss.scalar();
            ++steps;
        }
        losses.push_back(total / static_cast<double>(steps));
        if (on_epoch) on_epoch(epoch + 1, losses.back());
    }
    return losses;
}

RefinerExample make_refiner_example(const recognizer::Recognizer& model, const PoseSequence& seq)
{
    return {model.encoder_features(seq), coarse_annotate_sequence(model, seq).token_labels};
}

SequenceLabels refine_annotate(const recognizer::Recognizer& model, const Refiner& refiner, const PoseSequence& seq)
{
    const AssembledTokens tokens = assemble_tokens(seq);
    SequenceLabels out;
    out.hands = tokens.hands;
    out.token_labels = refiner.predict(model.encoder_features(seq));
    out.labels = split_by_hand(out.token_labels, tokens);
    return out;
}

}  // namespace fslab::annotate
