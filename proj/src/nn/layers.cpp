#include "fslab/nn/layers.hpp"

#include <cmath>

namespace fslab::nn {

std::size_t ParamList::count() const
{
    std::size_t n = 0;
    for (const auto& [name, p] : items_) n += static_cast<std::size_t>(p.value().size());
    return n;
}

void ParamList::zero_grad() const
{
    for (auto [name, p] : items_) p.zero_grad();
}

void xavier_uniform(const ParamList& params, Rng& rng)
{
    for (auto [name, p] : params.items()) {
        Mat& w = p.mutable_value();
        if (w.rows() < 2 || w.cols() < 2) continue;
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    }
}

Var activate(const Var& x, Activation act)
{
    return act == Activation::gelu ? gelu(x) : relu(x);
}

namespace {

Mat uniform(int rows, int cols, double bound, Rng& rng)
{
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

}  // namespace

Linear::Linear(int in, int out, Rng& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = leaf(uniform(in, out, bound, rng));
    bias = leaf(uniform(1, out, bound, rng));
}

void Linear::collect(ParamList& params, const std::string& prefix) const
{
    params.add(prefix + ".weight", weight);
    params.add(prefix + ".bias", bias);
}

LayerNorm::LayerNorm(int dim)
{
    gamma = leaf(Mat::Ones(1, dim));
    beta = leaf(Mat::Zero(1, dim));
}

void LayerNorm::collect(ParamList& params, const std::string& prefix) const
{
    params.add(prefix + ".gamma", gamma);
    params.add(prefix + ".beta", beta);
}

Embedding::Embedding(int count, int dim, Rng& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    Mat m(count, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    table = leaf(std::move(m));
}

void Embedding::collect(ParamList& params, const std::string& prefix) const
{
    params.add(prefix + ".table", table);
}

MultiHeadAttention::MultiHeadAttention(int hidden, int heads_, double dropout_, Rng& rng)
    : q(hidden, hidden, rng), k(hidden, hidden, rng), v(hidden, hidden, rng), out(hidden, hidden, rng),
      heads(heads_), dropout(dropout_)
{
}

AttentionOutput MultiHeadAttention::operator()(const Var& query, const Var& memory,
                                               std::span<const Segment> segments, bool causal,
                                               const Ctx& ctx) const
{
    auto res = attention(q(query), k(memory), v(memory), heads, segments, causal, dropout, ctx.rng, ctx.training);
    return {out(res.context), res.probs};
}

void MultiHeadAttention::collect(ParamList& params, const std::string& prefix) const
{
    q.collect(params, prefix + ".q");
    k.collect(params, prefix + ".k");
    v.collect(params, prefix + ".v");
    out.collect(params, prefix + ".out");
}

FeedForward::FeedForward(int hidden, int ffn, Activation act_, double dropout_, Rng& rng)
    : up(hidden, ffn, rng), down(ffn, hidden, rng), act(act_), dropout(dropout_)
{
}

Var FeedForward::operator()(const Var& x, const Ctx& ctx) const
{
    return down(nn::dropout(activate(up(x), act), dropout, ctx.rng, ctx.training));
}

void FeedForward::collect(ParamList& params, const std::string& prefix) const
{
    up.collect(params, prefix + ".up");
    down.collect(params, prefix + ".down");
}

EncoderLayer::EncoderLayer(int hidden, int ffn, int heads, double dropout_, Activation act, Rng& rng, bool pre_norm_)
    : self_attn(hidden, heads, dropout_, rng), ff(hidden, ffn, act, dropout_, rng), norm1(hidden), norm2(hidden),
      dropout(dropout_), pre_norm(pre_norm_)
{
}

Var EncoderLayer::operator()(const Var& x, std::span<const Segment> segments, const Ctx& ctx) const
{
    if (pre_norm) {
        Var n = norm1(x);
        Var h = add(x, nn::dropout(self_attn(n, n, segments, false, ctx).context, dropout, ctx.rng, ctx.training));
        return add(h, nn::dropout(ff(norm2(h), ctx), dropout, ctx.rng, ctx.training));
    }
    auto sa = self_attn(x, x, segments, false, ctx);
    Var h = norm1(add(x, nn::dropout(sa.context, dropout, ctx.rng, ctx.training)));
    return norm2(add(h, nn::dropout(ff(h, ctx), dropout, ctx.rng, ctx.training)));
}

void EncoderLayer::collect(ParamList& params, const std::string& prefix) const
{
    self_attn.collect(params, prefix + ".self_attn");
    ff.collect(params, prefix + ".ff");
    norm1.collect(params, prefix + ".norm1");
    norm2.collect(params, prefix + ".norm2");
}

DecoderLayer::DecoderLayer(int hidden, int ffn, int heads, double dropout_, Activation act, Rng& rng, bool pre_norm_)
    : self_attn(hidden, heads, dropout_, rng), cross_attn(hidden, heads, dropout_, rng),
      ff(hidden, ffn, act, dropout_, rng), norm1(hidden), norm2(hidden), norm3(hidden), dropout(dropout_),
      pre_norm(pre_norm_)
{
}

Var DecoderLayer::operator()(const Var& x, const Var& memory, std::span<const Segment> self_segments,
                             std::span<const Segment> cross_segments, const Ctx& ctx, Var* cross_probs) const
{
    if (pre_norm) {
        Var n = norm1(x);
        Var h = add(x, nn::dropout(self_attn(n, n, self_segments, true, ctx).context, dropout, ctx.rng, ctx.training));
        auto ca = cross_attn(norm2(h), memory, cross_segments, false, ctx);
        if (cross_probs != nullptr) *cross_probs = ca.probs;
        h = add(h, nn::dropout(ca.context, dropout, ctx.rng, ctx.training));
        return add(h, nn::dropout(ff(norm3(h), ctx), dropout, ctx.rng, ctx.training));
    }
    auto sa = self_attn(x, x, self_segments, true, ctx);
    Var h = norm1(add(x, nn::dropout(sa.context, dropout, ctx.rng, ctx.training)));
    auto ca = cross_attn(h, memory, cross_segments, false, ctx);
    if (cross_probs != nullptr) *cross_probs = ca.probs;
    h = norm2(add(h, nn::dropout(ca.context, dropout, ctx.rng, ctx.training)));
    return norm3(add(h, nn::dropout(ff(h, ctx), dropout, ctx.rng, ctx.training)));
}

void DecoderLayer::collect(ParamList& params, const std::string& prefix) const
{
    self_attn.collect(params, prefix + ".self_attn");
    cross_attn.collect(params, prefix + ".cross_attn");
    ff.collect(params, prefix + ".ff");
    norm1.collect(params, prefix + ".norm1");
    norm2.collect(params, prefix + ".norm2");
    norm3.collect(params, prefix + ".norm3");
}

Vec sinusoid(double position, int dim)
{
    Vec pe(dim);
    for (int i = 0; i < dim; i += 2) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
        pe(i) = std::sin(position * freq);
        if (i + 1 < dim) pe(i + 1) = std::cos(position * freq);
    }
    return pe;
}

Mat sinusoid_table(std::span<const int> positions, int dim)
{
    Mat table(static_cast<Eigen::Index>(positions.size()), dim);
    for (std::size_t r = 0; r < positions.size(); ++r) {
        table.row(static_cast<Eigen::Index>(r)) = sinusoid(positions[r], dim).transpose();
    }
    return table;
}

}  // namespace fslab::nn
