#include "fslab/generator/generator.hpp"

#include "fslab/core/errors.hpp"
#include "fslab/core/pose.hpp"
#include "fslab/nn/checkpoint.hpp"
#include "fslab/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace fslab::generator {

void GeneratorConfig::validate() const
{
    if (layers < 1) throw ConfigError("generator: need at least one layer");
    if (hidden < 2 || heads < 1 || hidden % heads != 0) throw ConfigError("generator: hidden must be divisible by heads");
    if (pose_embed + letter_embed != hidden) throw ConfigError("generator: pose_embed + letter_embed must equal hidden");
    if (pose_embed < 1 || letter_embed < 1 || ffn < 1) throw ConfigError("generator: widths must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("generator: dropout must lie in [0, 1)");
    if (pose_dim != kJoints * 3 && pose_dim != kJoints * 2) throw ConfigError("generator: pose_dim must be 63 or 42");
    if (diffusion_steps < 1) throw ConfigError("generator: diffusion_steps must be positive");
    if (epochs < 0 || batch_size < 1) throw ConfigError("generator: epochs and batch_size must be positive");
    if (lr <= 0.0) throw ConfigError("generator: lr must be positive");
}

nlohmann::json to_json(const GeneratorConfig& cfg)
{
    return {{"layers", cfg.layers},
            {"hidden", cfg.hidden},
            {"ffn", cfg.ffn},
            {"heads", cfg.heads},
            {"dropout", cfg.dropout},
            {"pose_dim", cfg.pose_dim},
            {"pose_embed", cfg.pose_embed},
            {"letter_embed", cfg.letter_embed},
            {"diffusion_steps", cfg.diffusion_steps},
            {"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"lr", cfg.lr},
            {"conditioning", cfg.conditioning == Conditioning::fwlc ? "fwlc" : "lc"}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j)
{
    GeneratorConfig cfg;
    cfg.layers = j.at("layers");
    cfg.hidden = j.at("hidden");
    cfg.ffn = j.at("ffn");
    cfg.heads = j.at("heads");
    cfg.dropout = j.at("dropout");
    cfg.pose_dim = j.at("pose_dim");
    cfg.pose_embed = j.at("pose_embed");
    cfg.letter_embed = j.at("letter_embed");
    cfg.diffusion_steps = j.at("diffusion_steps");
    cfg.epochs = j.at("epochs");
    cfg.batch_size = j.at("batch_size");
    cfg.lr = j.at("lr");
    const std::string mode = j.at("conditioning");
    if (mode != "fwlc" && mode != "lc") throw ConfigError("generator: unknown conditioning '" + mode + "'");
    cfg.conditioning = mode == "fwlc" ? Conditioning::fwlc : Conditioning::lc;
    cfg.validate();
    return cfg;
}

DiffusionSchedule cosine_schedule(int steps, double s)
{
    if (steps < 1) throw ConfigError("diffusion schedule: steps must be positive");
    auto f = [s](double u) {
        const double c = std::cos((u + s) / (1.0 + s) * std::numbers::pi / 2.0);
        return c * c;
    };
    DiffusionSchedule out;
    const double f0 = f(0.0);
    for (int t = 0; t <= steps; ++t) {
        const double ab = f(static_cast<double>(t) / steps) / f0;
        out.alphas_bar.push_back(std::clamp(ab, 1e-5, 1.0));
    }
    return out;
}

Matrix forward_noise(const Matrix& x0, double alpha_bar, const Matrix& noise)
{
    return std::sqrt(alpha_bar) * x0 + std::sqrt(1.0 - alpha_bar) * noise;
}

Matrix implied_noise(const Matrix& x_t, const Matrix& x0_hat, double alpha_bar)
{
    return (x_t - std::sqrt(alpha_bar) * x0_hat) / std::sqrt(1.0 - alpha_bar);
}

Matrix ddim_step(const Matrix& x_t, const Matrix& x0_hat, const DiffusionSchedule& schedule, int t)
{
    if (t < 1 || t > schedule.steps()) throw std::out_of_range("ddim_step: t outside [1, T]");
    const double prev = schedule.at(t - 1);
    const double now = schedule.at(t);
    if (now >= 1.0) return x0_hat;
    return forward_noise(x0_hat, prev, implied_noise(x_t, x0_hat, now));
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

std::vector<int> collapse_frame_letters(std::span<const int> frame_letters, const Charset& charset)
{
    std::vector<int> out;
    int last = -1;
    for (int l : frame_letters) {
        if (l != last && charset.is_letter(l)) out.push_back(l);
        last = l;
    }
    return out;
}

Generator::Generator(const GeneratorConfig& config, const Charset& charset, std::uint64_t seed)
    : config_(config), charset_(charset)
{
    config_.validate();
    schedule_ = cosine_schedule(config_.diffusion_steps);
    Rng rng = make_rng(seed, "generator.init");
    const int h = config_.hidden;
    time1_ = nn::Linear(h, h, rng);
    time2_ = nn::Linear(h, h, rng);
    pose_embed_ = nn::Linear(config_.pose_dim, config_.pose_embed, rng);
    letter_embed_ = nn::Embedding(charset_.id_space(), config_.letter_embed, rng);
    for (int i = 0; i < config_.layers; ++i) {
        layers_.emplace_back(h, config_.ffn, config_.heads, config_.dropout, nn::Activation::gelu, rng);
    }
    head_ = nn::Linear(h, config_.pose_dim, rng);

    time1_.collect(params_, "time.linear1");
    time2_.collect(params_, "time.linear2");
    pose_embed_.collect(params_, "pose_embed");
    letter_embed_.collect(params_, "letter_embed");
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(params_, "encoder." + std::to_string(i));
    head_.collect(params_, "head");
}

nn::Var Generator::time_embedding(std::span<const int> t) const
{
    Matrix table(static_cast<Eigen::Index>(t.size()), config_.hidden);
    for (std::size_t i = 0; i < t.size(); ++i) {
        table.row(static_cast<Eigen::Index>(i)) = nn::sinusoid(t[i], config_.hidden).transpose();
    }
    return time2_(nn::silu(time1_(nn::constant(std::move(table)))));
}

nn::Var Generator::lc_condition(std::span<const int> word_letters) const
{
    if (word_letters.empty()) throw DataError("generator: empty letter sequence");
    for (int l : word_letters) {
        if (!charset_.is_letter(l)) throw DataError("generator: LC condition must contain letters only");
    }
    const Matrix zeros = Matrix::Zero(static_cast<Eigen::Index>(word_letters.size()), config_.pose_embed);
    return nn::concat_cols(nn::constant(zeros), letter_embed_(word_letters));
}

void Generator::check(const Matrix& x_t, const Condition& cond) const
{
    if (cond.frame_letters.empty()) throw DataError("generator: empty letter sequence");
    if (x_t.rows() != static_cast<Eigen::Index>(cond.frame_letters.size())) {
        throw DataError("generator: " + std::to_string(cond.frame_letters.size()) + " frame letters for " +
                        std::to_string(x_t.rows()) + " pose frames");
    }
    if (x_t.cols() != config_.pose_dim) throw DataError("generator: pose width differs from pose_dim");
    for (int l : cond.frame_letters) {
        if (!charset_.is_letter(l) && l != charset_.blank_id()) {
            throw DataError("generator: frame letters must be letters or blank");
        }
    }
}

nn::Var Generator::predict_clean(std::span<const Matrix> x_t, std::span<const int> t, std::span<const Condition> cond,
                                 const nn::Ctx& ctx) const
{
    if (x_t.size() != t.size() || x_t.size() != cond.size() || x_t.empty()) {
        throw std::invalid_argument("predict_clean: batch parts differ in size");
    }
    Eigen::Index frames = 0;
    for (std::size_t b = 0; b < x_t.size(); ++b) {
        check(x_t[b], cond[b]);
        if (t[b] < 0 || t[b] > schedule_.steps()) throw std::out_of_range("predict_clean: t outside [0, T]");
        frames += x_t[b].rows();
    }

    Matrix packed(frames, config_.pose_dim);
    std::vector<int> frame_ids;
    frame_ids.reserve(static_cast<std::size_t>(frames));
    Eigen::Index row = 0;
    for (std::size_t b = 0; b < x_t.size(); ++b) {
        packed.middleRows(row, x_t[b].rows()) = x_t[b];
        row += x_t[b].rows();
        if (config_.conditioning == Conditioning::fwlc) {
            frame_ids.insert(frame_ids.end(), cond[b].frame_letters.begin(), cond[b].frame_letters.end());
        } else {
            frame_ids.insert(frame_ids.end(), static_cast<std::size_t>(x_t[b].rows()), charset_.pad_id());
        }
    }
    const nn::Var frame_tokens = nn::concat_cols(pose_embed_(nn::constant(std::move(packed))), letter_embed_(frame_ids));
    const nn::Var time_tokens = time_embedding(t);

    std::vector<nn::Var> parts;
    std::vector<nn::Segment> segments;
    std::vector<int> positions;
    std::vector<int> output_rows;
    Eigen::Index offset = 0;
    Eigen::Index frame_offset = 0;
    for (std::size_t b = 0; b < x_t.size(); ++b) {
        const Eigen::Index start = offset;
        parts.push_back(nn::slice_rows(time_tokens, static_cast<Eigen::Index>(b), 1));
        offset += 1;
        if (config_.conditioning == Conditioning::lc) {
            const std::vector<int> word = cond[b].word_letters.empty()
                                              ? collapse_frame_letters(cond[b].frame_letters, charset_)
                                              : cond[b].word_letters;
            parts.push_back(lc_condition(word));
            offset += static_cast<Eigen::Index>(word.size());
        }
        const Eigen::Index n = x_t[b].rows();
        parts.push_back(nn::slice_rows(frame_tokens, frame_offset, n));
        for (Eigen::Index r = 0; r < n; ++r) output_rows.push_back(static_cast<int>(offset + r));
        offset += n;
        frame_offset += n;
        const Eigen::Index len = offset - start;
        segments.push_back({start, len, start, len});
        for (Eigen::Index p = 0; p < len; ++p) positions.push_back(static_cast<int>(p));
    }
    nn::Var x = nn::add_const(nn::concat_rows(parts), nn::sinusoid_table(positions, config_.hidden));
    x = nn::dropout(x, config_.dropout, ctx.rng, ctx.training);
    for (const auto& layer : layers_) x = layer(x, segments, ctx);
    return head_(nn::gather_rows(x, output_rows));
}

Matrix Generator::predict_clean(const Matrix& x_t, int t, const Condition& cond) const
{
    nn::NoGradGuard guard;
    return predict_clean(std::span<const Matrix>(&x_t, 1), std::span<const int>(&t, 1),
                         std::span<const Condition>(&cond, 1), nn::Ctx{})
        .value();
}

Matrix Generator::sample(const Condition& cond, Rng& rng) const
{
    if (cond.frame_letters.empty()) throw DataError("generator: empty letter sequence");
    Matrix x = standard_normal(static_cast<Eigen::Index>(cond.frame_letters.size()), config_.pose_dim, rng);
    for (int t = schedule_.steps(); t >= 1; --t) {
        const Matrix x0_hat = predict_clean(x, t, cond);
        x = ddim_step(x, x0_hat, schedule_, t);
    }
    return x;
}

void Generator::save(const std::filesystem::path& path) const
{
    nlohmann::json cfg = to_json(config_);
    cfg["punctuation"] = std::string(charset_.punctuation());
    nn::save_checkpoint(path, {"generator", cfg, charset_.hash()}, params_);
}

Generator Generator::load(const std::filesystem::path& path, const Charset& charset)
{
    const auto header = nn::read_checkpoint_header(path);
    if (header.kind != "generator") throw CheckpointMismatch(path.string() + " is a " + header.kind + " checkpoint");
    if (header.charset_hash != charset.hash()) {
        throw CheckpointMismatch("charset hash mismatch between checkpoint and current charset");
    }
    Generator model(generator_config_from_json(header.config), charset, 0);
    nn::load_checkpoint_params(path, model.params_);
    return model;
}

nn::Var train_step(const Generator& gen, std::span<const GeneratorExample> batch, Rng& rng, const nn::Ctx& ctx)
{
    if (batch.empty()) throw DataError("generator: empty batch");
    const int steps = gen.schedule().steps();
    std::uniform_int_distribution<int> pick_t(1, steps);
    std::vector<Matrix> noised;
    std::vector<int> ts;
    std::vector<Condition> conds;
    Eigen::Index rows = 0;
    for (const auto& ex : batch) {
        const int t = pick_t(rng);
        const Matrix noise = standard_normal(ex.x0.rows(), ex.x0.cols(), rng);
        noised.push_back(forward_noise(ex.x0, gen.schedule().at(t), noise));
        ts.push_back(t);
        conds.push_back(ex.cond);
        rows += ex.x0.rows();
    }
    Matrix target(rows, gen.config().pose_dim);
    Eigen::Index r = 0;
    for (const auto& ex : batch) {
        target.middleRows(r, ex.x0.rows()) = ex.x0;
        r += ex.x0.rows();
    }
    return nn::mse(gen.predict_clean(noised, ts, conds, ctx), target);
}

std::vector<double> train_generator(Generator& gen, std::span<const GeneratorExample> data, std::uint64_t seed,
                                    const std::function<void(int epoch, double loss)>& on_epoch)
{
    const auto& cfg = gen.config();
    if (data.empty()) throw DataError("generator: empty training set");
    Rng order_rng = make_rng(seed, "generator.order");
    Rng noise_rng = make_rng(seed, "generator.noise");
    Rng dropout_rng = make_rng(seed, "generator.dropout");
    nn::Adam adam(gen.params(), cfg.lr);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> losses;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<GeneratorExample> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            nn::Var loss = train_step(gen, batch, noise_rng, nn::Ctx{true, &dropout_rng});
            gen.params().zero_grad();
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

GeneratorExample make_generator_example(const PoseSequence& seq, const FrameLabels& labels, const Charset& charset)
{
    if (seq.tracks.empty()) throw DataError("generator: sequence " + seq.id + " has no tracks");
    const HandTrack* track = seq.signing_hand ? seq.find_track(*seq.signing_hand) : &seq.tracks.front();
    if (!track) throw DataError("generator: signing hand of " + seq.id + " has no track");
    if (static_cast<int>(labels.labels.size()) != track->frame_count()) {
        throw DataError("generator: label count of " + seq.id + " differs from its frame count");
    }
    GeneratorExample ex;
    ex.x0 = track->frames;
    ex.cond.frame_letters = labels.labels;
    ex.cond.word_letters = collapse_frame_letters(labels.labels, charset);
    return ex;
}

std::function<Matrix(const std::vector<int>&, Rng&)> make_sampler(const Generator& gen)
{
    return [&gen](const std::vector<int>& frame_letters, Rng& rng) {
        Condition cond{frame_letters, collapse_frame_letters(frame_letters, gen.charset())};
        return gen.sample(cond, rng);
    };
}

}  // namespace fslab::generator
