#pragma once

#include "fslab/core/pose.hpp"

#include <span>
#include <vector>

namespace fslab {

/// Decoder cross-attention of one sample, head-averaged within each layer.
struct CrossAttentionMap {
    std::vector<Matrix> layers;       // L_d entries of [rows x T_total]
    std::vector<int> frame_index;     // [T_total]
    Matrix hand_membership;           // [T_total x N]
    std::vector<HandIdentity> hands;  // identity of each membership column
    std::vector<char> valid_mask;     // [T_total]; empty means every token is valid

    int layer_count() const { return static_cast<int>(layers.size()); }
    int rows() const { return layers.empty() ? 0 : static_cast<int>(layers.front().rows()); }
    int tokens() const { return static_cast<int>(frame_index.size()); }
    bool valid(int t) const { return valid_mask.empty() || valid_mask[static_cast<std::size_t>(t)] != 0; }
};

/// Zeroes masked tokens and rescales each row to sum to one over the valid
/// ones. Rows without mass stay zero.
Matrix renormalize_rows(const Matrix& attn, std::span<const char> valid_mask);

/// Mean over layers of the valid-token-renormalized attention: [rows x T_total].
Matrix layer_average_attention(const CrossAttentionMap& attn);

/// Per-hand attention mass sum_i sum_t A[i,t] H[t,h].
Eigen::VectorXd hand_attention_mass(const Matrix& averaged, const Matrix& hand_membership);

/// Hand receiving the largest attention mass; ties go to the lowest hand index.
HandIdentity detect_signing_hand(const Matrix& averaged, const Matrix& hand_membership,
                                 std::span<const HandIdentity> hands);

}  // namespace fslab
