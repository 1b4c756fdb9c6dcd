#include "fslab/losses/losses.hpp"

#include "fslab/core/errors.hpp"
#include "fslab/nn/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace fslab::losses {

void LossWeights::validate() const
{
    if (sf < 0.0 || ma < 0.0) throw ConfigError("loss weights must be non-negative");
    if (eps <= 0.0) throw ConfigError("entropy epsilon must be positive");
    if (blank_weight < 0.0) throw ConfigError("blank weight must be non-negative");
}

double ce_loss(const Matrix& logits, std::span<const int> targets, int pad_id)
{
    nn::NoGradGuard guard;
    return nn::cross_entropy(nn::constant(logits), targets, pad_id).scalar();
}

namespace {

// d(renormalized)/d(raw) applied to an upstream gradient, row by row.
Matrix renormalize_backward(const Matrix& raw, const Matrix& normalized, const Matrix& upstream,
                            std::span<const char> mask)
{
    Matrix grad = Matrix::Zero(raw.rows(), raw.cols());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index t = 0; t < raw.cols(); ++t) {
            if (mask.empty() || mask[static_cast<std::size_t>(t)]) s += raw(i, t);
        }
        if (s <= 0.0) continue;
        const double proj = upstream.row(i).dot(normalized.row(i));
        for (Eigen::Index t = 0; t < raw.cols(); ++t) {
            if (mask.empty() || mask[static_cast<std::size_t>(t)]) grad(i, t) = (upstream(i, t) - proj) / s;
        }
    }
    return grad;
}

void check_layers(std::span<const Matrix> layers)
{
    for (const auto& l : layers) {
        if (l.rows() != layers.front().rows() || l.cols() != layers.front().cols()) {
            throw std::invalid_argument("attention layers differ in shape");
        }
    }
}

int valid_count(std::span<const char> mask, Eigen::Index tokens)
{
    if (mask.empty()) return static_cast<int>(tokens);
    int n = 0;
    for (char m : mask) n += m ? 1 : 0;
    return n;
}

}  // namespace

AttentionLossGrad sf_loss_grad(std::span<const Matrix> layers, const Matrix& hand_membership,
                               std::span<const char> valid_mask, double eps)
{
    AttentionLossGrad out;
    if (layers.empty()) return out;
    check_layers(layers);
    const Eigen::Index rows = layers.front().rows();
    const Eigen::Index hands = hand_membership.cols();
    for (const auto& l : layers) out.grad.push_back(Matrix::Zero(l.rows(), l.cols()));
    if (rows == 0 || hands == 0) return out;
    if (hand_membership.rows() != layers.front().cols()) {
        throw std::invalid_argument("sf_loss: hand membership rows differ from token count");
    }

    const double n_layers = static_cast<double>(layers.size());
    std::vector<Matrix> normalized;
    Matrix avg = Matrix::Zero(rows, layers.front().cols());
    for (const auto& l : layers) {
        normalized.push_back(renormalize_rows(l, valid_mask));
        avg += normalized.back();
    }
    avg /= n_layers;

    const Matrix a = avg * hand_membership;  // [rows x N]
    const double norm = 1.0 / (static_cast<double>(rows) * static_cast<double>(hands));
    Matrix da(rows, hands);
    double total = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index h = 0; h < hands; ++h) {
            const double v = a(i, h);
            total += -v * std::log(v + eps);
            da(i, h) = -(std::log(v + eps) + v / (v + eps)) * norm;
        }
    }
    out.value = total * norm;

    const Matrix davg = da * hand_membership.transpose() / n_layers;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        out.grad[l] = renormalize_backward(layers[l], normalized[l], davg, valid_mask);
    }
    return out;
}

AttentionLossGrad ma_loss_grad(std::span<const Matrix> layers, std::span<const char> valid_mask,
                               bool average_layers)
{
    AttentionLossGrad out;
    if (layers.empty()) return out;
    check_layers(layers);
    for (const auto& l : layers) out.grad.push_back(Matrix::Zero(l.rows(), l.cols()));
    const Eigen::Index rows = layers.front().rows();
    const Eigen::Index tokens = layers.front().cols();
    const int valid = valid_count(valid_mask, tokens);
    if (rows < 2 || valid == 0) return out;

    double norm = 1.0 / (static_cast<double>(rows - 1) * static_cast<double>(valid));
    if (average_layers) norm /= static_cast<double>(layers.size());

    double total = 0.0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Matrix r = renormalize_rows(layers[l], valid_mask);
        Matrix cum = r;
        for (Eigen::Index t = 1; t < tokens; ++t) cum.col(t) += cum.col(t - 1);
        Matrix dcum = Matrix::Zero(rows, tokens);
        for (Eigen::Index i = 1; i < rows; ++i) {
            for (Eigen::Index t = 0; t < tokens; ++t) {
                const double delta = cum(i, t) - cum(i - 1, t);
                if (delta > 0.0) {
                    total += delta;
                    dcum(i, t) += norm;
                    dcum(i - 1, t) -= norm;
                }
            }
        }
        // cumulative-sum backward: reverse cumulative sum
        Matrix dr = dcum;
        for (Eigen::Index t = tokens - 2; t >= 0; --t) dr.col(t) += dr.col(t + 1);
        out.grad[l] = renormalize_backward(layers[l], r, dr, valid_mask);
    }
    out.value = total * norm;
    return out;
}

double sf_loss(const CrossAttentionMap& attn, double eps)
{
    return sf_loss_grad(attn.layers, attn.hand_membership, attn.valid_mask, eps).value;
}

double ma_loss(const CrossAttentionMap& attn, bool average_layers)
{
    return ma_loss_grad(attn.layers, attn.valid_mask, average_layers).value;
}

double total_loss(double ce, double sf, double ma, const LossWeights& weights)
{
    return ce + weights.sf * sf + weights.ma * ma;
}

AuxLoss auxiliary_loss(std::span<const nn::Var> layer_probs, std::span<const AttentionBlock> blocks,
                       const LossWeights& weights, bool use_sf, bool use_ma)
{
    AuxLoss out;
    if (blocks.empty()) {
        out.weighted = nn::constant(Matrix::Zero(1, 1));
        return out;
    }
    const double inv_b = 1.0 / static_cast<double>(blocks.size());
    // per block, per layer: combined weighted gradient
    std::vector<std::vector<Matrix>> grads;
    grads.reserve(blocks.size());
    double weighted = 0.0;
    for (const auto& b : blocks) {
        std::vector<Matrix> layers;
        for (const auto& p : layer_probs) layers.push_back(p.value().block(b.row_offset, 0, b.rows, b.tokens));
        std::vector<Matrix> g;
        for (const auto& l : layers) g.push_back(Matrix::Zero(l.rows(), l.cols()));
        const std::span<const char> all_valid;
        if (use_sf) {
            auto sf = sf_loss_grad(layers, *b.hand_membership, all_valid, weights.eps);
            out.sf += sf.value * inv_b;
            weighted += weights.sf * sf.value;
            for (std::size_t l = 0; l < g.size(); ++l) g[l] += weights.sf * sf.grad[l];
        }
        if (use_ma) {
            auto ma = ma_loss_grad(layers, all_valid, weights.ma_average_layers);
            out.ma += ma.value * inv_b;
            weighted += weights.ma * ma.value;
            for (std::size_t l = 0; l < g.size(); ++l) g[l] += weights.ma * ma.grad[l];
        }
        grads.push_back(std::move(g));
    }
    Matrix value(1, 1);
    value(0, 0) = weighted * inv_b;
    std::vector<nn::Var> parents(layer_probs.begin(), layer_probs.end());
    std::vector<AttentionBlock> where(blocks.begin(), blocks.end());
    out.weighted = nn::make_node(std::move(value), std::move(parents),
                                 [grads = std::move(grads), where = std::move(where), inv_b](nn::Node& node) {
                                     const double up = node.grad(0, 0) * inv_b;
                                     for (std::size_t b = 0; b < where.size(); ++b) {
                                         for (std::size_t l = 0; l < node.parents.size(); ++l) {
                                             auto& p = *node.parents[l];
                                             if (!p.requires_grad) continue;
                                             p.grad.block(where[b].row_offset, 0, where[b].rows, where[b].tokens) +=
                                                 up * grads[b][l];
                                         }
                                     }
                                 });
    return out;
}

}  // namespace fslab::losses
