#pragma once

#include "fslab/core/pose.hpp"
#include "fslab/core/random.hpp"
#include "fslab/eval/metrics.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fslab::testing {

/// Elementwise relative error between two gradients; entries where both
/// sides are below `floor` in magnitude count as agreeing.
double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-7);

struct GradCheck {
    int cases = 0;
    double worst = 0.0;  // largest relative error seen
};

/// Central differences of sf_loss and ma_loss on `cases` random
/// [2 layers x 3 letters x 8 tokens] attention tensors over two hands.
GradCheck attention_loss_gradcheck(std::uint64_t seed, int cases = 10);

/// End-to-end cross-entropy gradient of a tiny 2-layer recognizer (hidden 16,
/// 2 heads) with respect to `coordinates` random pose input values.
GradCheck recognizer_ce_gradcheck(std::uint64_t seed, int coordinates = 20);
/// Same model and loss, at random parameter entries.
GradCheck recognizer_param_gradcheck(std::uint64_t seed, int coordinates = 20);

/// Memoized recursion over prefixes: fewest edits, then most substitutions,
/// trying the last operation as substitution/match, deletion, insertion.
eval::EditCounts brute_force_edit(std::string_view ref, std::string_view hyp);

/// Every string over `alphabet` with length at most `max_len`, shortest first.
std::vector<std::string> all_strings(int max_len, std::string_view alphabet);

/// Random track with `frames` frames over (-3, 5).
HandTrack random_track(Rng& rng, int frames, int dims, HandIdentity who = {});

}  // namespace fslab::testing
