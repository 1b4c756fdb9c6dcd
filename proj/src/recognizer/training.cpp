#include "fslab/recognizer/training.hpp"

#include "fslab/core/errors.hpp"
#include "fslab/nn/ops.hpp"
#include "fslab/nn/optim.hpp"

#include <algorithm>
#include <numeric>

namespace fslab::recognizer {

void TrainConfig::validate() const
{
    if (epochs < 0) throw ConfigError("recognizer training: epochs must be non-negative");
    if (lr <= 0.0) throw ConfigError("recognizer training: lr must be positive");
    if (batch_size < 1) throw ConfigError("recognizer training: batch_size must be positive");
    if (lr_decay <= 0.0) throw ConfigError("recognizer training: lr_decay must be positive");
    if (decay_every < 1) throw ConfigError("recognizer training: decay_every must be positive");
    if (aux_warmup < 0) throw ConfigError("recognizer training: aux_warmup must be non-negative");
    weights.validate();
}

nlohmann::json to_json(const TrainConfig& cfg)
{
    return {{"epochs", cfg.epochs},
            {"lr", cfg.lr},
            {"lr_decay", cfg.lr_decay},
            {"decay_every", cfg.decay_every},
            {"batch_size", cfg.batch_size},
            {"use_sf", cfg.use_sf},
            {"use_ma", cfg.use_ma},
            {"aux_warmup", cfg.aux_warmup},
            {"lambda_sf", cfg.weights.sf},
            {"lambda_ma", cfg.weights.ma},
            {"eps", cfg.weights.eps},
            {"ma_average_layers", cfg.weights.ma_average_layers}};
}

TrainConfig train_config_from_json(const nlohmann::json& j)
{
    TrainConfig cfg;
    cfg.epochs = j.at("epochs");
    cfg.lr = j.at("lr");
    cfg.lr_decay = j.at("lr_decay");
    cfg.decay_every = j.at("decay_every");
    cfg.batch_size = j.at("batch_size");
    cfg.use_sf = j.at("use_sf");
    cfg.use_ma = j.at("use_ma");
    cfg.aux_warmup = j.at("aux_warmup");
    cfg.weights.sf = j.at("lambda_sf");
    cfg.weights.ma = j.at("lambda_ma");
    cfg.weights.eps = j.at("eps");
    cfg.weights.ma_average_layers = j.at("ma_average_layers");
    cfg.validate();
    return cfg;
}

nlohmann::json to_json(const EpochLog& log)
{
    nlohmann::json j = {{"epoch", log.epoch}, {"ce", log.ce}, {"sf", log.sf}, {"ma", log.ma}, {"total", log.total}};
    j["dev_letter_acc"] = log.dev_letter_acc ? nlohmann::json(*log.dev_letter_acc) : nlohmann::json(nullptr);
    return j;
}

BatchLoss batch_loss(const Recognizer& model, std::span<const PoseSequence> batch, const TrainConfig& config,
                     const nn::Ctx& ctx)
{
    BatchLoss out;
    TrainForward fwd = model.forward_train(batch, ctx);
    nn::Var ce = nn::cross_entropy(fwd.logits, fwd.targets, model.charset().pad_id());
    out.ce = ce.scalar();
    out.pose_input = fwd.pose_input;
    out.token_offset = fwd.token_offset;
    out.total = ce;
    if (config.use_sf || config.use_ma) {
        std::vector<losses::AttentionBlock> blocks;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            blocks.push_back({fwd.row_offset[b], fwd.word_length[b], fwd.tokens[b].total(),
                              &fwd.tokens[b].hand_membership});
        }
        auto aux = losses::auxiliary_loss(fwd.cross_probs, blocks, config.weights, config.use_sf, config.use_ma);
        out.sf = aux.sf;
        out.ma = aux.ma;
        out.total = nn::add(ce, aux.weighted);
    }
    return out;
}

std::vector<EpochLog> train_recognizer(Recognizer& model, std::span<const PoseSequence> train,
                                       std::span<const PoseSequence> dev, const TrainConfig& config,
                                       std::uint64_t seed, const std::function<void(const EpochLog&)>& on_epoch)
{
    config.validate();
    if (train.empty()) throw DataError("recognizer training: empty training set");
    Rng order_rng = make_rng(seed, "recognizer.order");
    Rng dropout_rng = make_rng(seed, "recognizer.dropout");
    nn::Adam adam(model.params(), config.lr);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochLog> logs;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        adam.set_lr(nn::step_decay(config.lr, config.lr_decay, config.decay_every, epoch));
        std::shuffle(order.begin(), order.end(), order_rng);
        EpochLog log;
        log.epoch = epoch + 1;
        std::size_t batches = 0;
        TrainConfig step_config = config;
        if (epoch < config.aux_warmup) step_config.use_sf = step_config.use_ma = false;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<PoseSequence> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
            const nn::Ctx ctx{true, &dropout_rng};
            BatchLoss loss = batch_loss(model, batch, step_config, ctx);
            model.params().zero_grad();
            nn::backward(loss.total);
            adam.step();
            log.ce += loss.ce;
            log.sf += loss.sf;
            log.ma += loss.ma;
            log.total += loss.total.scalar();
            ++batches;
        }
        const double nb = static_cast<double>(batches);
        log.ce /= nb;
        log.sf /= nb;
        log.ma /= nb;
        log.total /= nb;
        if (!dev.empty()) {
            const auto preds = recognize(model, dev);
            log.dev_letter_acc = eval::letter_accuracy(preds);
        }
        logs.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    return logs;
}

std::vector<eval::Prediction> recognize(const Recognizer& model, std::span<const PoseSequence> data, int batch_size)
{
    std::vector<eval::Prediction> out;
    out.reserve(data.size());
    const std::size_t step = static_cast<std::size_t>(std::max(1, batch_size));
    for (std::size_t start = 0; start < data.size(); start += step) {
        const std::size_t n = std::min(step, data.size() - start);
        auto results = model.greedy_decode_batch(data.subspan(start, n));
        for (std::size_t i = 0; i < n; ++i) out.push_back({data[start + i].word, results[i].word});
    }
    return out;
}

}  // namespace fslab::recognizer
