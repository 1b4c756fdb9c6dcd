#pragma once

#include "fslab/nn/tensor.hpp"
#include "fslab/recognizer/attention_map.hpp"

#include <span>
#include <vector>

namespace fslab::losses {

struct LossWeights {
    double sf = 0.8;
    double ma = 1.0;
    double eps = 1e-8;           // log guard in the hand-attention entropy
    double blank_weight = 0.1;   // refiner cross-entropy only
    bool ma_average_layers = false;  // false: sum over layers as written

    void validate() const;
};

/// Mean softmax cross-entropy over rows whose target is not `pad_id`.
double ce_loss(const Matrix& logits, std::span<const int> targets, int pad_id);

/// Loss value together with d(loss)/d(attention) for every layer.
struct AttentionLossGrad {
    double value = 0.0;
    std::vector<Matrix> grad;
};

/// Signing-hand focus: entropy of per-letter hand attention, averaged over
/// letters and hands, computed on the layer average of valid-renormalized rows.
AttentionLossGrad sf_loss_grad(std::span<const Matrix> layers, const Matrix& hand_membership,
                               std::span<const char> valid_mask, double eps = 1e-8);

/// Monotonic alignment: positive part of the difference between consecutive
/// letters' cumulative attention, summed over layers, letters >= 2 and tokens,
/// divided by (|W| - 1) * T. Zero when fewer than two rows.
AttentionLossGrad ma_loss_grad(std::span<const Matrix> layers, std::span<const char> valid_mask,
                               bool average_layers = false);

double sf_loss(const CrossAttentionMap& attn, double eps = 1e-8);
double ma_loss(const CrossAttentionMap& attn, bool average_layers = false);

double total_loss(double ce, double sf, double ma, const LossWeights& weights = {});

/// Location of one sample inside packed per-layer attention tensors.
struct AttentionBlock {
    Eigen::Index row_offset = 0;
    Eigen::Index rows = 0;    // letter rows used by the losses
    Eigen::Index tokens = 0;  // valid key columns
    const Matrix* hand_membership = nullptr;
};

struct AuxLoss {
    nn::Var weighted;  // batch mean of sf_weight*SF + ma_weight*MA
    double sf = 0.0;   // batch means of the unweighted terms
    double ma = 0.0;
};

/// Auxiliary objective wired into the graph; its backward applies the
/// analytic attention gradients above.
AuxLoss auxiliary_loss(std::span<const nn::Var> layer_probs, std::span<const AttentionBlock> blocks,
                       const LossWeights& weights, bool use_sf, bool use_ma);

}  // namespace fslab::losses
