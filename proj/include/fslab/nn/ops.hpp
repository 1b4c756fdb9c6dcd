#pragma once

#include "fslab/core/random.hpp"
#include "fslab/nn/tensor.hpp"

#include <span>
#include <vector>

namespace fslab::nn {

// Elementwise and linear algebra.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_rowvec(const Var& a, const Var& row);  // row is [1 x cols]
Var add_const(const Var& a, const Mat& c);     // c has a's shape, no gradient
Var matmul(const Var& a, const Var& b);
/// x [n x in] * w [in x out] + b [1 x out]
Var linear(const Var& x, const Var& w, const Var& b);

Var relu(const Var& x);
Var gelu(const Var& x);  // exact erf form
Var silu(const Var& x);

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var dropout(const Var& x, double p, Rng* rng, bool training);

/// Row gather from an embedding table.
Var embedding(const Var& table, std::span<const int> ids);

Var concat_cols(const Var& a, const Var& b);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& x, std::span<const int> rows);

Var sum(const Var& x);
Var mean(const Var& x);

/// Mean squared error over all elements.
Var mse(const Var& pred, const Mat& target);

/// Softmax cross-entropy over rows. Rows whose target equals `ignore_index`
/// are excluded. With `class_weights` each row's loss is multiplied by the
/// weight of its target; the reduction always divides by the count of
/// non-ignored rows.
Var cross_entropy(const Var& logits, std::span<const int> targets, int ignore_index,
                  std::span<const double> class_weights = {});

/// Variable-length attention block: queries [q_offset, q_offset+q_len) attend
/// to keys [k_offset, k_offset+k_len) only.
struct Segment {
    Eigen::Index q_offset = 0;
    Eigen::Index q_len = 0;
    Eigen::Index k_offset = 0;
    Eigen::Index k_len = 0;
};

struct AttentionOutput {
    Var context;  // [total_q x hidden]
    /// Head-averaged, pre-dropout attention probabilities packed as
    /// [total_q x max_k]; segment s occupies rows q_offset.. and columns 0..k_len.
    Var probs;
};

/// Scaled dot-product multi-head attention on already-projected q/k/v.
/// Gradient reaching `probs` is folded into the softmax backward.
AttentionOutput attention(const Var& q, const Var& k, const Var& v, int heads,
                          std::span<const Segment> segments, bool causal,
                          double dropout_p, Rng* rng, bool training);

}  // namespace fslab::nn
