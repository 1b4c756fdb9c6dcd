#include "fslab/eval/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace fslab::eval {

EditCounts levenshtein_counts(std::string_view ref, std::string_view hyp)
{
    // Each cell keeps the fewest edits and, among those, the most substitutions.
    struct Cell {
        int cost = 0;
        int subs = 0;
        bool operator<(const Cell& o) const { return cost < o.cost || (cost == o.cost && subs > o.subs); }
        bool operator==(const Cell&) const = default;
    };
    const std::size_t n = ref.size();
    const std::size_t m = hyp.size();
    std::vector<Cell> cell((n + 1) * (m + 1));
    auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
    auto diag = [&](std::size_t i, std::size_t j) {
        Cell c = cell[at(i - 1, j - 1)];
        if (ref[i - 1] != hyp[j - 1]) {
            ++c.cost;
            ++c.subs;
        }
        return c;
    };
    auto step = [&](std::size_t i, std::size_t j) { return Cell{cell[at(i, j)].cost + 1, cell[at(i, j)].subs}; };

    for (std::size_t i = 0; i <= n; ++i) cell[at(i, 0)] = {static_cast<int>(i), 0};
    for (std::size_t j = 0; j <= m; ++j) cell[at(0, j)] = {static_cast<int>(j), 0};
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            cell[at(i, j)] = std::min({diag(i, j), step(i - 1, j), step(i, j - 1)});
        }
    }

    EditCounts counts;
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        const Cell here = cell[at(i, j)];
        if (i > 0 && j > 0 && here == diag(i, j)) {
            if (ref[i - 1] != hyp[j - 1]) ++counts.substitutions;
            --i;
            --j;
        } else if (i > 0 && here == step(i - 1, j)) {
            ++counts.deletions;
            --i;
        } else {
            ++counts.insertions;
            --j;
        }
    }
    return counts;
}

double letter_accuracy(std::span<const Prediction> pairs, Aggregation mode)
{
    double errors = 0.0;
    double length = 0.0;
    double score_sum = 0.0;
    std::size_t counted = 0;
    for (const auto& p : pairs) {
        if (p.reference.empty()) continue;
        const double e = levenshtein_counts(p.reference, p.hypothesis).total();
        const double n = static_cast<double>(p.reference.size());
        errors += e;
        length += n;
        score_sum += 1.0 - e / n;
        ++counted;
    }
    if (counted == 0) return 0.0;
    return mode == Aggregation::corpus ? 1.0 - errors / length : score_sum / static_cast<double>(counted);
}

std::size_t count_empty_references(std::span<const Prediction> pairs)
{
    return static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(), [](const Prediction& p) { return p.reference.empty(); }));
}

double top1_accuracy(std::span<const Prediction> pairs)
{
    if (pairs.empty()) return 0.0;
    const auto exact = std::count_if(pairs.begin(), pairs.end(),
                                     [](const Prediction& p) { return p.reference == p.hypothesis; });
    return static_cast<double>(exact) / static_cast<double>(pairs.size());
}

double hand_detection_accuracy(std::span<const HandIdentity> predicted, std::span<const HandIdentity> truth)
{
    if (predicted.size() != truth.size()) throw std::invalid_argument("hand_detection_accuracy: size mismatch");
    if (predicted.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

VocabularySplit split_iv_oov(std::span<const std::string> test_words, const std::set<std::string>& train_vocabulary)
{
    VocabularySplit split;
    for (const auto& w : test_words) {
        (train_vocabulary.count(w) ? split.in_vocabulary : split.out_of_vocabulary).push_back(w);
    }
    return split;
}

}  // namespace fslab::eval
