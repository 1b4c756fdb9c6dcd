#pragma once

#include "fslab/core/pose.hpp"

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fslab::eval {

struct EditCounts {
    int substitutions = 0;
    int deletions = 0;   // reference symbols missing from the hypothesis
    int insertions = 0;  // extra hypothesis symbols

    int total() const { return substitutions + deletions + insertions; }
    friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

/// Minimal unit-cost alignment. Among minimal alignments the one with the
/// most substitutions wins, which fixes (S, D, I) uniquely; the backtrace
/// tries substitution (or match), then deletion, then insertion.
EditCounts levenshtein_counts(std::string_view ref, std::string_view hyp);

struct Prediction {
    std::string reference;
    std::string hypothesis;
};

enum class Aggregation { corpus, per_sample };

/// 1 - (S + D + I) / N. Corpus aggregation sums errors and reference lengths;
/// per-sample averages the per-pair scores. Pairs with an empty reference are
/// skipped (see count_empty_references). May be negative.
double letter_accuracy(std::span<const Prediction> pairs, Aggregation mode = Aggregation::corpus);
std::size_t count_empty_references(std::span<const Prediction> pairs);

/// Fraction of pairs recognized exactly.
double top1_accuracy(std::span<const Prediction> pairs);

double hand_detection_accuracy(std::span<const HandIdentity> predicted, std::span<const HandIdentity> truth);

struct VocabularySplit {
    std::vector<std::string> in_vocabulary;
    std::vector<std::string> out_of_vocabulary;
};

VocabularySplit split_iv_oov(std::span<const std::string> test_words, const std::set<std::string>& train_vocabulary);

}  // namespace fslab::eval
