#pragma once

#include "fslab/core/charset.hpp"
#include "fslab/core/pose.hpp"
#include "fslab/core/random.hpp"
#include "fslab/nn/layers.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace fslab::generator {

enum class Conditioning {
    fwlc,  // each frame carries its own letter embedding
    lc,    // one prefix token per letter of the word, frames carry the pad embedding
};

struct GeneratorConfig {
    int layers = 8;
    int hidden = 256;
    int ffn = 1024;
    int heads = 4;
    double dropout = 0.1;
    int pose_dim = 63;
    int pose_embed = 128;
    int letter_embed = 128;
    int diffusion_steps = 50;
    int epochs = 1000;
    int batch_size = 20;
    double lr = 1e-4;
    Conditioning conditioning = Conditioning::fwlc;

    void validate() const;
};

nlohmann::json to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

/// alphas_bar[t] for t = 0..steps.
struct DiffusionSchedule {
    std::vector<double> alphas_bar;
    int steps() const { return static_cast<int>(alphas_bar.size()) - 1; }
    double at(int t) const { return alphas_bar.at(static_cast<std::size_t>(t)); }
};

/// f(t/T) / f(0) with f(u) = cos^2((u + s) / (1 + s) * pi / 2), clipped to [1e-5, 1].
DiffusionSchedule cosine_schedule(int steps, double s = 0.008);

/// sqrt(ab) * x0 + sqrt(1 - ab) * noise
Matrix forward_noise(const Matrix& x0, double alpha_bar, const Matrix& noise);
/// Noise implied by a clean estimate: (x_t - sqrt(ab) * x0_hat) / sqrt(1 - ab).
Matrix implied_noise(const Matrix& x_t, const Matrix& x0_hat, double alpha_bar);
/// Deterministic reverse step (eta = 0) from t to t - 1.
Matrix ddim_step(const Matrix& x_t, const Matrix& x0_hat, const DiffusionSchedule& schedule, int t);

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// One conditioning request: frame letters (letter ids or blank), and the
/// word's letters for LC mode.
struct Condition {
    std::vector<int> frame_letters;
    std::vector<int> word_letters;
};

/// Word letters recovered from frame letters: blanks dropped, runs collapsed.
std::vector<int> collapse_frame_letters(std::span<const int> frame_letters, const Charset& charset);

class Generator {
public:
    Generator(const GeneratorConfig& config, const Charset& charset, std::uint64_t seed);

    const GeneratorConfig& config() const { return config_; }
    const Charset& charset() const { return charset_; }
    const nn::ParamList& params() const { return params_; }
    const DiffusionSchedule& schedule() const { return schedule_; }

    /// Prefix tokens of LC mode: [|W| x hidden], zero pose half.
    nn::Var lc_condition(std::span<const int> word_letters) const;

    /// Packed clean-pose prediction for a batch; rows follow the inputs.
    nn::Var predict_clean(std::span<const Matrix> x_t, std::span<const int> t, std::span<const Condition> cond,
                          const nn::Ctx& ctx) const;
    /// Single sequence, eval mode.
    Matrix predict_clean(const Matrix& x_t, int t, const Condition& cond) const;

    /// Starts from unit Gaussian noise and runs every reverse step.
    Matrix sample(const Condition& cond, Rng& rng) const;

    void save(const std::filesystem::path& path) const;
    static Generator load(const std::filesystem::path& path, const Charset& charset);

private:
    nn::Var time_embedding(std::span<const int> t) const;
    void check(const Matrix& x_t, const Condition& cond) const;

    GeneratorConfig config_;
    Charset charset_;
    DiffusionSchedule schedule_;
    nn::Linear time1_, time2_;
    nn::Linear pose_embed_;
    nn::Embedding letter_embed_;
    std::vector<nn::EncoderLayer> layers_;
    nn::Linear head_;
    nn::ParamList params_;
};

struct GeneratorExample {
    Matrix x0;  // [T x pose_dim]
    Condition cond;
};

/// Draws t uniformly from [1, T] and fresh noise per example; mean squared
/// error between the prediction and x0 over the whole batch.
nn::Var train_step(const Generator& gen, std::span<const GeneratorExample> batch, Rng& rng, const nn::Ctx& ctx);

/// Training pair from the signing-hand track (first track when unknown) and
/// per-frame labels of that track.
GeneratorExample make_generator_example(const PoseSequence& seq, const FrameLabels& labels, const Charset& charset);

/// Letter-to-pose sampler for benchmark building; LC mode conditions on the
/// collapsed word.
std::function<Matrix(const std::vector<int>&, Rng&)> make_sampler(const Generator& gen);

std::vector<double> train_generator(Generator& gen, std::span<const GeneratorExample> data, std::uint64_t seed,
                                    const std::function<void(int epoch, double loss)>& on_epoch = {});

}  // namespace fslab::generator
