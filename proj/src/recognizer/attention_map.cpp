#include "fslab/recognizer/attention_map.hpp"

#include <stdexcept>

namespace fslab {

Matrix renormalize_rows(const Matrix& attn, std::span<const char> valid_mask)
{
    Matrix out = attn;
    if (!valid_mask.empty()) {
        if (static_cast<Eigen::Index>(valid_mask.size()) != attn.cols()) {
            throw std::invalid_argument("renormalize_rows: mask width differs from token count");
        }
        for (Eigen::Index t = 0; t < out.cols(); ++t) {
            if (!valid_mask[static_cast<std::size_t>(t)]) out.col(t).setZero();
        }
    }
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double s = out.row(i).sum();
        if (s > 0.0) out.row(i) /= s;
    }
    return out;
}

Matrix layer_average_attention(const CrossAttentionMap& attn)
{
    if (attn.layers.empty()) return Matrix::Zero(0, attn.tokens());
    Matrix avg = Matrix::Zero(attn.rows(), attn.tokens());
    for (const auto& layer : attn.layers) avg += renormalize_rows(layer, attn.valid_mask);
    return avg / static_cast<double>(attn.layers.size());
}

Eigen::VectorXd hand_attention_mass(const Matrix& averaged, const Matrix& hand_membership)
{
    if (averaged.cols() != hand_membership.rows()) {
        throw std::invalid_argument("hand_attention_mass: token count mismatch");
    }
    return (averaged.colwise().sum() * hand_membership).transpose();
}

HandIdentity detect_signing_hand(const Matrix& averaged, const Matrix& hand_membership,
                                 std::span<const HandIdentity> hands)
{
    if (hands.empty() || static_cast<Eigen::Index>(hands.size()) != hand_membership.cols()) {
        throw std::invalid_argument("detect_signing_hand: need one identity per hand column");
    }
    if (hands.size() == 1) return hands.front();
    const Eigen::VectorXd mass = hand_attention_mass(averaged, hand_membership);
    std::size_t best = 0;
    for (std::size_t h = 1; h < hands.size(); ++h) {
        const double m = mass(static_cast<Eigen::Index>(h));
        const double b = mass(static_cast<Eigen::Index>(best));
        if (m > b || (m == b && hands[h].hand_index() < hands[best].hand_index())) best = h;
    }
    return hands[best];
}

}  // namespace fslab
