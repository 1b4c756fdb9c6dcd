#include "fslab/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fslab::nn {

namespace {

Node& parent(Node& out, std::size_t i) { return *out.parents[i]; }

void require_same_shape(const Var& a, const Var& b, const char* op)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Var add(const Var& a, const Var& b)
{
    require_same_shape(a, b, "add");
    return make_node(a.value() + b.value(), {a, b}, [](Node& out) {
        for (std::size_t i = 0; i < 2; ++i) {
            if (parent(out, i).requires_grad) parent(out, i).grad += out.grad;
        }
    });
}

Var sub(const Var& a, const Var& b)
{
    require_same_shape(a, b, "sub");
    return make_node(a.value() - b.value(), {a, b}, [](Node& out) {
        if (parent(out, 0).requires_grad) parent(out, 0).grad += out.grad;
        if (parent(out, 1).requires_grad) parent(out, 1).grad -= out.grad;
    });
}

Var scale(const Var& a, double s)
{
    return make_node(a.value() * s, {a}, [s](Node& out) { parent(out, 0).grad += s * out.grad; });
}

Var add_rowvec(const Var& a, const Var& row)
{
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw std::invalid_argument("add_rowvec: expected [1 x cols] row");
    }
    Mat value = a.value().rowwise() + row.value().row(0);
    return make_node(std::move(value), {a, row}, [](Node& out) {
        if (parent(out, 0).requires_grad) parent(out, 0).grad += out.grad;
        if (parent(out, 1).requires_grad) parent(out, 1).grad += out.grad.colwise().sum();
    });
}

Var add_const(const Var& a, const Mat& c)
{
    if (c.rows() != a.rows() || c.cols() != a.cols()) {
        throw std::invalid_argument("add_const: shape mismatch");
    }
    return make_node(a.value() + c, {a}, [](Node& out) { parent(out, 0).grad += out.grad; });
}

Var matmul(const Var& a, const Var& b)
{
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimension mismatch");
    }
    Mat value = a.value() * b.value();
    return make_node(std::move(value), {a, b}, [](Node& out) {
        Node& pa = parent(out, 0);
        Node& pb = parent(out, 1);
        if (pa.requires_grad) pa.grad.noalias() += out.grad * pb.value.transpose();
        if (pb.requires_grad) pb.grad.noalias() += pa.value.transpose() * out.grad;
    });
}

Var linear(const Var& x, const Var& w, const Var& b)
{
    if (x.cols() != w.rows() || b.cols() != w.cols() || b.rows() != 1) {
        throw std::invalid_argument("linear: shape mismatch");
    }
    Mat value(x.rows(), w.cols());
    value.noalias() = x.value() * w.value();
    value.rowwise() += b.value().row(0);
    return make_node(std::move(value), {x, w, b}, [](Node& out) {
        Node& px = parent(out, 0);
        Node& pw = parent(out, 1);
        Node& pb = parent(out, 2);
        if (px.requires_grad) px.grad.noalias() += out.grad * pw.value.transpose();
        if (pw.requires_grad) pw.grad.noalias() += px.value.transpose() * out.grad;
        if (pb.requires_grad) pb.grad += out.grad.colwise().sum();
    });
}

Var relu(const Var& x)
{
    Mat value = x.value().cwiseMax(0.0);
    return make_node(std::move(value), {x}, [](Node& out) {
        Node& px = parent(out, 0);
        px.grad.array() += (px.value.array() > 0.0).select(out.grad.array(), 0.0);
    });
}

Var gelu(const Var& x)
{
    Mat value = x.value().unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
    return make_node(std::move(value), {x}, [](Node& out) {
        Node& px = parent(out, 0);
        Mat d = px.value.unaryExpr([](double v) {
            return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
        });
        px.grad.array() += d.array() * out.grad.array();
    });
}

Var silu(const Var& x)
{
    Mat value = x.value().unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
    return make_node(std::move(value), {x}, [](Node& out) {
        Node& px = parent(out, 0);
        Mat d = px.value.unaryExpr([](double v) {
            const double s = 1.0 / (1.0 + std::exp(-v));
            return s * (1.0 + v * (1.0 - s));
        });
        px.grad.array() += d.array() * out.grad.array();
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps)
{
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (gamma.cols() != d || beta.cols() != d) {
        throw std::invalid_argument("layer_norm: parameter width mismatch");
    }
    Mat xhat(n, d);
    Vec inv_std(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mu = x.value().row(r).mean();
        const double var = (x.value().row(r).array() - mu).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (x.value().row(r).array() - mu) * inv_std(r);
    }
    Mat value = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    return make_node(std::move(value), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& out) {
                         Node& px = parent(out, 0);
                         Node& pg = parent(out, 1);
                         Node& pb = parent(out, 2);
                         if (pg.requires_grad) pg.grad += (out.grad.array() * xhat.array()).colwise().sum().matrix();
                         if (pb.requires_grad) pb.grad += out.grad.colwise().sum();
                         if (px.requires_grad) {
                             const double d = static_cast<double>(xhat.cols());
                             Mat g = out.grad.array().rowwise() * pg.value.row(0).array();
                             for (Eigen::Index r = 0; r < g.rows(); ++r) {
                                 const double mg = g.row(r).mean();
                                 const double mgx = g.row(r).dot(xhat.row(r)) / d;
                                 px.grad.row(r).array() +=
                                     inv_std(r) * (g.row(r).array() - mg - xhat.row(r).array() * mgx);
                             }
                         }
                     });
}

Var dropout(const Var& x, double p, Rng* rng, bool training)
{
    if (!training || p <= 0.0) {
        return x;
    }
    if (rng == nullptr) {
        throw std::invalid_argument("dropout: training mode requires an rng");
    }
    std::bernoulli_distribution keep(1.0 - p);
    Mat mask(x.rows(), x.cols());
    const double s = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = keep(*rng) ? s : 0.0;
    }
    Mat value = x.value().cwiseProduct(mask);
    return make_node(std::move(value), {x}, [mask = std::move(mask)](Node& out) {
        parent(out, 0).grad.array() += out.grad.array() * mask.array();
    });
}

Var embedding(const Var& table, std::span<const int> ids)
{
    Mat value(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.rows()) {
            throw std::out_of_range("embedding: id out of range");
        }
        value.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    std::vector<int> idx(ids.begin(), ids.end());
    return make_node(std::move(value), {table}, [idx = std::move(idx)](Node& out) {
        Node& pt = parent(out, 0);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            pt.grad.row(idx[i]) += out.grad.row(static_cast<Eigen::Index>(i));
        }
    });
}

Var concat_cols(const Var& a, const Var& b)
{
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("concat_cols: row mismatch");
    }
    Mat value(a.rows(), a.cols() + b.cols());
    value.leftCols(a.cols()) = a.value();
    value.rightCols(b.cols()) = b.value();
    const Eigen::Index ca = a.cols();
    const Eigen::Index cb = b.cols();
    return make_node(std::move(value), {a, b}, [ca, cb](Node& out) {
        if (parent(out, 0).requires_grad) parent(out, 0).grad += out.grad.leftCols(ca);
        if (parent(out, 1).requires_grad) parent(out, 1).grad += out.grad.rightCols(cb);
    });
}

Var concat_rows(std::span<const Var> parts)
{
    if (parts.empty()) {
        throw std::invalid_argument("concat_rows: no inputs");
    }
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts.front().cols();
    for (const auto& p : parts) {
        if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
        rows += p.rows();
    }
    Mat value(rows, cols);
    std::vector<Eigen::Index> offsets;
    offsets.reserve(parts.size());
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        value.middleRows(off, p.rows()) = p.value();
        off += p.rows();
    }
    std::vector<Var> parents(parts.begin(), parts.end());
    return make_node(std::move(value), std::move(parents), [offsets = std::move(offsets)](Node& out) {
        for (std::size_t i = 0; i < out.parents.size(); ++i) {
            Node& p = *out.parents[i];
            if (p.requires_grad) p.grad += out.grad.middleRows(offsets[i], p.value.rows());
        }
    });
}

Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count)
{
    if (start < 0 || count < 0 || start + count > x.rows()) {
        throw std::out_of_range("slice_rows: range outside tensor");
    }
    Mat value = x.value().middleRows(start, count);
    return make_node(std::move(value), {x}, [start, count](Node& out) {
        parent(out, 0).grad.middleRows(start, count) += out.grad;
    });
}

Var gather_rows(const Var& x, std::span<const int> rows)
{
    Mat value(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= x.rows()) throw std::out_of_range("gather_rows: row out of range");
        value.row(static_cast<Eigen::Index>(i)) = x.value().row(rows[i]);
    }
    std::vector<int> idx(rows.begin(), rows.end());
    return make_node(std::move(value), {x}, [idx = std::move(idx)](Node& out) {
        Node& px = parent(out, 0);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            px.grad.row(idx[i]) += out.grad.row(static_cast<Eigen::Index>(i));
        }
    });
}

Var sum(const Var& x)
{
    Mat value(1, 1);
    value(0, 0) = x.value().sum();
    return make_node(std::move(value), {x}, [](Node& out) { parent(out, 0).grad.array() += out.grad(0, 0); });
}

Var mean(const Var& x)
{
    const double n = static_cast<double>(x.value().size());
    Mat value(1, 1);
    value(0, 0) = x.value().sum() / n;
    return make_node(std::move(value), {x}, [n](Node& out) { parent(out, 0).grad.array() += out.grad(0, 0) / n; });
}

Var mse(const Var& pred, const Mat& target)
{
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw std::invalid_argument("mse: shape mismatch");
    }
    Mat diff = pred.value() - target;
    const double n = static_cast<double>(diff.size());
    Mat value(1, 1);
    value(0, 0) = diff.squaredNorm() / n;
    return make_node(std::move(value), {pred}, [diff = std::move(diff), n](Node& out) {
        parent(out, 0).grad += (2.0 * out.grad(0, 0) / n) * diff;
    });
}

Var cross_entropy(const Var& logits, std::span<const int> targets, int ignore_index,
                  std::span<const double> class_weights)
{
    const Eigen::Index n = logits.rows();
    const Eigen::Index c = logits.cols();
    if (static_cast<Eigen::Index>(targets.size()) != n) {
        throw std::invalid_argument("cross_entropy: target count differs from logit rows");
    }
    if (!class_weights.empty() && static_cast<Eigen::Index>(class_weights.size()) != c) {
        throw std::invalid_argument("cross_entropy: class weight count differs from class count");
    }
    Mat probs(n, c);
    double total = 0.0;
    std::size_t counted = 0;
    std::vector<double> row_weight(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double m = logits.value().row(r).maxCoeff();
        probs.row(r) = (logits.value().row(r).array() - m).exp();
        const double z = probs.row(r).sum();
        probs.row(r) /= z;
        const int t = targets[static_cast<std::size_t>(r)];
        if (t == ignore_index) continue;
        if (t < 0 || t >= c) throw std::out_of_range("cross_entropy: target out of range");
        const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(t)];
        row_weight[static_cast<std::size_t>(r)] = w;
        total += w * -(logits.value()(r, t) - m - std::log(z));
        ++counted;
    }
    if (counted == 0) {
        throw std::invalid_argument("cross_entropy: every position is ignored");
    }
    const double denom = static_cast<double>(counted);
    Mat value(1, 1);
    value(0, 0) = total / denom;
    std::vector<int> tgt(targets.begin(), targets.end());
    return make_node(std::move(value), {logits},
                     [probs = std::move(probs), tgt = std::move(tgt), row_weight = std::move(row_weight),
                      denom](Node& out) {
                         Node& pl = parent(out, 0);
                         const double g = out.grad(0, 0) / denom;
                         for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                             const double w = row_weight[static_cast<std::size_t>(r)];
                             if (w == 0.0) continue;
                             pl.grad.row(r) += (g * w) * probs.row(r);
                             pl.grad(r, tgt[static_cast<std::size_t>(r)]) -= g * w;
                         }
                     });
}

namespace {

struct HeadCache {
    Mat probs;    // softmax output, pre-dropout
    Mat dropped;  // probs after dropout (what multiplies V)
    Mat mask;     // dropout mask scaled by 1/(1-p); empty when unused
};

struct AttentionState {
    std::vector<Segment> segments;
    int heads = 1;
    double inv_sqrt_dh = 1.0;
    std::vector<HeadCache> cache;  // segment-major, head-minor
    std::weak_ptr<Node> probs_node;
};

}  // namespace

AttentionOutput attention(const Var& q, const Var& k, const Var& v, int heads,
                          std::span<const Segment> segments, bool causal, double dropout_p, Rng* rng,
                          bool training)
{
    const Eigen::Index hidden = q.cols();
    if (k.cols() != hidden || v.cols() != hidden || k.rows() != v.rows()) {
        throw std::invalid_argument("attention: q/k/v shape mismatch");
    }
    if (heads <= 0 || hidden % heads != 0) {
        throw std::invalid_argument("attention: hidden not divisible by heads");
    }
    const Eigen::Index dh = hidden / heads;
    const bool use_dropout = training && dropout_p > 0.0;
    if (use_dropout && rng == nullptr) {
        throw std::invalid_argument("attention: training dropout requires an rng");
    }

    auto state = std::make_shared<AttentionState>();
    state->segments.assign(segments.begin(), segments.end());
    state->heads = heads;
    state->inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Eigen::Index max_k = 0;
    for (const auto& s : segments) {
        if (s.k_len <= 0) throw std::invalid_argument("attention: segment without keys");
        if (s.q_offset + s.q_len > q.rows() || s.k_offset + s.k_len > k.rows()) {
            throw std::out_of_range("attention: segment outside tensor");
        }
        max_k = std::max(max_k, s.k_len);
    }

    Mat context = Mat::Zero(q.rows(), hidden);
    Mat avg = Mat::Zero(q.rows(), std::max<Eigen::Index>(max_k, 1));
    std::bernoulli_distribution keep(1.0 - dropout_p);
    const double keep_scale = use_dropout ? 1.0 / (1.0 - dropout_p) : 1.0;
    state->cache.reserve(segments.size() * static_cast<std::size_t>(heads));

    for (const auto& s : segments) {
        for (int h = 0; h < heads; ++h) {
            const auto qh = q.value().block(s.q_offset, h * dh, s.q_len, dh);
            const auto kh = k.value().block(s.k_offset, h * dh, s.k_len, dh);
            const auto vh = v.value().block(s.k_offset, h * dh, s.k_len, dh);
            HeadCache hc;
            hc.probs.noalias() = (qh * kh.transpose()) * state->inv_sqrt_dh;
            for (Eigen::Index r = 0; r < s.q_len; ++r) {
                if (causal) {
                    // query r may see keys 0..r (decoder self-attention: q_len == k_len)
                    for (Eigen::Index c = r + 1; c < s.k_len; ++c) {
                        hc.probs(r, c) = -std::numeric_limits<double>::infinity();
                    }
                }
                const double m = hc.probs.row(r).maxCoeff();
                hc.probs.row(r) = (hc.probs.row(r).array() - m).exp();
                hc.probs.row(r) /= hc.probs.row(r).sum();
            }
            if (use_dropout) {
                hc.mask.resize(s.q_len, s.k_len);
                for (Eigen::Index i = 0; i < hc.mask.size(); ++i) {
                    hc.mask.data()[i] = keep(*rng) ? keep_scale : 0.0;
                }
                hc.dropped = hc.probs.cwiseProduct(hc.mask);
            }
            const Mat& used = use_dropout ? hc.dropped : hc.probs;
            context.block(s.q_offset, h * dh, s.q_len, dh).noalias() = used * vh;
            avg.block(s.q_offset, 0, s.q_len, s.k_len) += hc.probs / static_cast<double>(heads);
            state->cache.push_back(std::move(hc));
        }
    }

    Var ctx = make_node(std::move(context), {q, k, v}, [state, dh](Node& out) {
        Node& pq = parent(out, 0);
        Node& pk = parent(out, 1);
        Node& pv = parent(out, 2);
        std::shared_ptr<Node> pn = state->probs_node.lock();
        const bool ext = pn && pn->has_grad();
        std::size_t ci = 0;
        for (const auto& s : state->segments) {
            for (int h = 0; h < state->heads; ++h, ++ci) {
                const HeadCache& hc = state->cache[ci];
                const auto qh = pq.value.block(s.q_offset, h * dh, s.q_len, dh);
                const auto kh = pk.value.block(s.k_offset, h * dh, s.k_len, dh);
                const auto vh = pv.value.block(s.k_offset, h * dh, s.k_len, dh);
                const auto gout = out.grad.block(s.q_offset, h * dh, s.q_len, dh);
                const Mat& used = hc.mask.size() ? hc.dropped : hc.probs;
                if (pv.requires_grad) {
                    pv.grad.block(s.k_offset, h * dh, s.k_len, dh).noalias() += used.transpose() * gout;
                }
                Mat dp = gout * vh.transpose();
                if (hc.mask.size()) dp.array() *= hc.mask.array();
                if (ext) {
                    dp += pn->grad.block(s.q_offset, 0, s.q_len, s.k_len) / static_cast<double>(state->heads);
                }
                // softmax backward
                Mat ds = hc.probs.array() *
                         (dp.array().colwise() - (dp.array() * hc.probs.array()).rowwise().sum());
                ds *= state->inv_sqrt_dh;
                if (pq.requires_grad) pq.grad.block(s.q_offset, h * dh, s.q_len, dh).noalias() += ds * kh;
                if (pk.requires_grad) pk.grad.block(s.k_offset, h * dh, s.k_len, dh).noalias() += ds.transpose() * qh;
            }
        }
    });

    // The probabilities hang off the context node so that any gradient they
    // receive is complete before the context backward runs.
    Var probs = make_node(std::move(avg), {ctx}, nullptr);
    if (probs.requires_grad()) {
        state->probs_node = probs.shared();
    }
    return {ctx, probs};
}

}  // namespace fslab::nn
