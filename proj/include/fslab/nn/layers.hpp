#pragma once

#include "fslab/core/random.hpp"
#include "fslab/nn/ops.hpp"

#include <string>
#include <utility>
#include <vector>

namespace fslab::nn {

/// Ordered list of named trainable tensors. Names are stable across runs and
/// key the checkpoint format.
class ParamList {
public:
    void add(std::string name, Var param) { items_.emplace_back(std::move(name), std::move(param)); }
    const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
    std::size_t count() const;  // total scalar parameters
    void zero_grad() const;

private:
    std::vector<std::pair<std::string, Var>> items_;
};

/// Re-draws every matrix parameter (both dimensions > 1) from
/// U(-b, b), b = sqrt(6 / (fan_in + fan_out)). Vectors are left alone.
void xavier_uniform(const ParamList& params, Rng& rng);

struct Ctx {
    bool training = false;
    Rng* rng = nullptr;
    bool input_grad = false;  // model inputs become gradient leaves
};

enum class Activation { gelu, relu };

Var activate(const Var& x, Activation act);

struct Linear {
    Var weight;  // [in x out]
    Var bias;    // [1 x out]

    Linear() = default;
    Linear(int in, int out, Rng& rng);
    Var operator()(const Var& x) const { return linear(x, weight, bias); }
    void collect(ParamList& params, const std::string& prefix) const;
};

struct LayerNorm {
    Var gamma;
    Var beta;

    LayerNorm() = default;
    explicit LayerNorm(int dim);
    Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
    void collect(ParamList& params, const std::string& prefix) const;
};

struct Embedding {
    Var table;  // [count x dim]

    Embedding() = default;
    Embedding(int count, int dim, Rng& rng);
    Var operator()(std::span<const int> ids) const { return embedding(table, ids); }
    void collect(ParamList& params, const std::string& prefix) const;
};

struct MultiHeadAttention {
    Linear q, k, v, out;
    int heads = 1;
    double dropout = 0.0;

    MultiHeadAttention() = default;
    MultiHeadAttention(int hidden, int heads, double dropout, Rng& rng);
    /// Returns the projected context and the head-averaged probabilities.
    AttentionOutput operator()(const Var& query, const Var& memory, std::span<const Segment> segments,
                               bool causal, const Ctx& ctx) const;
    void collect(ParamList& params, const std::string& prefix) const;
};

struct FeedForward {
    Linear up, down;
    Activation act = Activation::gelu;
    double dropout = 0.0;

    FeedForward() = default;
    FeedForward(int hidden, int ffn, Activation act, double dropout, Rng& rng);
    Var operator()(const Var& x, const Ctx& ctx) const;
    void collect(ParamList& params, const std::string& prefix) const;
};

/// Encoder layer (self-attention, feed-forward), post-norm unless `pre_norm`.
struct EncoderLayer {
    MultiHeadAttention self_attn;
    FeedForward ff;
    LayerNorm norm1, norm2;
    double dropout = 0.0;
    bool pre_norm = false;

    EncoderLayer() = default;
    EncoderLayer(int hidden, int ffn, int heads, double dropout, Activation act, Rng& rng, bool pre_norm = false);
    Var operator()(const Var& x, std::span<const Segment> segments, const Ctx& ctx) const;
    void collect(ParamList& params, const std::string& prefix) const;
};

/// Decoder layer (causal self-attention, cross-attention, feed-forward),
/// post-norm unless `pre_norm`.
struct DecoderLayer {
    MultiHeadAttention self_attn, cross_attn;
    FeedForward ff;
    LayerNorm norm1, norm2, norm3;
    double dropout = 0.0;
    bool pre_norm = false;

    DecoderLayer() = default;
    DecoderLayer(int hidden, int ffn, int heads, double dropout, Activation act, Rng& rng, bool pre_norm = false);
    /// `cross_probs` receives the head-averaged cross-attention of this layer.
    Var operator()(const Var& x, const Var& memory, std::span<const Segment> self_segments,
                   std::span<const Segment> cross_segments, const Ctx& ctx, Var* cross_probs) const;
    void collect(ParamList& params, const std::string& prefix) const;
};

/// Standard sinusoidal encoding of one integer position: even columns sin,
/// odd columns cos, frequency 1/10000^(2i/dim).
Vec sinusoid(double position, int dim);
Mat sinusoid_table(std::span<const int> positions, int dim);

}  // namespace fslab::nn
