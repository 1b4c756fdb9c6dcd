#include "fslab/eval/harness.hpp"
#include "fslab/eval/metrics.hpp"
#include "checks.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <tuple>

using namespace fslab;
using namespace fslab::eval;
using fslab::testing::all_strings;

namespace {

// Every alignment of ref against hyp, as (S, D, I) triples.
void enumerate(std::string_view ref, std::string_view hyp, EditCounts acc, std::set<std::tuple<int, int, int>>& out)
{
    if (ref.empty() && hyp.empty()) {
        out.insert({acc.substitutions, acc.deletions, acc.insertions});
        return;
    }
    if (!ref.empty() && !hyp.empty()) {
        EditCounts next = acc;
        if (ref[0] != hyp[0]) ++next.substitutions;
        enumerate(ref.substr(1), hyp.substr(1), next, out);
    }
    if (!ref.empty()) {
        EditCounts next = acc;
        ++next.deletions;
        enumerate(ref.substr(1), hyp, next, out);
    }
    if (!hyp.empty()) {
        EditCounts next = acc;
        ++next.insertions;
        enumerate(ref, hyp.substr(1), next, out);
    }
}

EditCounts oracle(std::string_view ref, std::string_view hyp)
{
    std::set<std::tuple<int, int, int>> all;
    enumerate(ref, hyp, {}, all);
    int best = 1 << 30;
    for (const auto& [s, d, i] : all) best = std::min(best, s + d + i);
    // Among the optimal alignments, the most substitutions, then the most deletions.
    EditCounts pick{-1, -1, -1};
    for (const auto& [s, d, i] : all) {
        if (s + d + i != best) continue;
        if (s > pick.substitutions || (s == pick.substitutions && d > pick.deletions)) pick = {s, d, i};
    }
    return pick;
}

}  // namespace

TEST_CASE("levenshtein examples")
{
    CHECK(levenshtein_counts("asl", "asl") == EditCounts{0, 0, 0});
    CHECK(levenshtein_counts("asl", "al") == EditCounts{0, 1, 0});
    CHECK(levenshtein_counts("nad", "nads") == EditCounts{0, 0, 1});
    CHECK(levenshtein_counts("ab", "xyzw") == EditCounts{2, 0, 2});
    CHECK(levenshtein_counts("", "abc") == EditCounts{0, 0, 3});
    CHECK(levenshtein_counts("abc", "") == EditCounts{0, 3, 0});
}

TEST_CASE("levenshtein against alignment enumeration")
{
    const auto strings = all_strings(4, "abc");
    for (const auto& r : strings) {
        for (const auto& h : strings) {
            const EditCounts got = levenshtein_counts(r, h);
            std::set<std::tuple<int, int, int>> all;
            enumerate(r, h, {}, all);
            int best = 1 << 30;
            for (const auto& [s, d, i] : all) best = std::min(best, s + d + i);
            CHECK(got.total() == best);
            CHECK(all.count({got.substitutions, got.deletions, got.insertions}) == 1);
            CHECK(got.deletions - got.insertions == static_cast<int>(r.size()) - static_cast<int>(h.size()));
        }
    }
}

TEST_CASE("backtrace prefers substitutions on ties")
{
    const auto strings = all_strings(3, "abc");
    for (const auto& r : strings) {
        for (const auto& h : strings) CHECK(levenshtein_counts(r, h) == oracle(r, h));
    }
}

TEST_CASE("levenshtein matches memoized recursion")
{
    const auto strings = all_strings(4, "abc");
    for (const auto& r : strings) {
        for (const auto& h : strings) CHECK(levenshtein_counts(r, h) == fslab::testing::brute_force_edit(r, h));
    }
}

TEST_CASE("levenshtein swap symmetry")
{
    const auto strings = all_strings(4, "abc");
    for (const auto& r : strings) {
        for (const auto& h : strings) {
            const auto a = levenshtein_counts(r, h);
            const auto b = levenshtein_counts(h, r);
            CHECK(a.total() == b.total());
            CHECK(a.substitutions == b.substitutions);
            CHECK(a.deletions == b.insertions);
            CHECK(a.insertions == b.deletions);
        }
    }
}

TEST_CASE("letter accuracy")
{
    std::vector<Prediction> exact{{"asl", "asl"}, {"nad", "nad"}};
    CHECK(letter_accuracy(exact) == 1.0);
    std::vector<Prediction> one{{"asl", "al"}};
    CHECK(letter_accuracy(one) == doctest::Approx(2.0 / 3.0));
    std::vector<Prediction> neg{{"ab", "xyzw"}};
    CHECK(letter_accuracy(neg) == doctest::Approx(-1.0));

    std::vector<Prediction> mixed{{"asl", "al"}, {"hello", "hello"}};
    CHECK(letter_accuracy(mixed) == doctest::Approx(1.0 - 1.0 / 8.0));
    CHECK(letter_accuracy(mixed, Aggregation::per_sample) == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));

    std::vector<Prediction> with_empty{{"", "x"}, {"ab", "ab"}};
    CHECK(letter_accuracy(with_empty) == 1.0);
    CHECK(count_empty_references(with_empty) == 1);
}

TEST_CASE("letter accuracy is 1 only for exact matches and ignores order")
{
    std::mt19937 rng(4);
    const auto strings = all_strings(3, "ab");
    std::uniform_int_distribution<std::size_t> pick(1, strings.size() - 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Prediction> pairs;
        bool all_exact = true;
        for (int k = 0; k < 4; ++k) {
            const auto& r = strings[pick(rng)];
            const auto& h = rng() % 2 ? r : strings[pick(rng)];
            all_exact = all_exact && r == h;
            pairs.push_back({r, h});
        }
        CHECK((letter_accuracy(pairs) == 1.0) == all_exact);
        auto shuffled = pairs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(letter_accuracy(shuffled) == doctest::Approx(letter_accuracy(pairs)));
        CHECK(top1_accuracy(shuffled) == doctest::Approx(top1_accuracy(pairs)));
    }
}

TEST_CASE("top-1 accuracy")
{
    std::vector<Prediction> p{{"a", "a"}, {"b", "b"}, {"c", "c"}, {"d", "x"}};
    CHECK(top1_accuracy(p) == 0.75);
    std::vector<Prediction> none{{"a", "b"}};
    CHECK(top1_accuracy(none) == 0.0);
}

TEST_CASE("hand detection accuracy")
{
    const HandIdentity r{0, Side::right}, l{0, Side::left};
    std::vector<HandIdentity> truth{r, l, r, l};
    CHECK(hand_detection_accuracy(truth, truth) == 1.0);
    std::vector<HandIdentity> half{r, r, l, l};
    CHECK(hand_detection_accuracy(half, truth) == 0.5);
}

TEST_CASE("IV/OOV split")
{
    const std::set<std::string> vocab{"asl", "nad"};
    std::vector<std::string> test{"asl", "hello"};
    auto split = split_iv_oov(test, vocab);
    CHECK(split.in_vocabulary == std::vector<std::string>{"asl"});
    CHECK(split.out_of_vocabulary == std::vector<std::string>{"hello"});
    split = split_iv_oov(std::vector<std::string>{"x", "y"}, std::set<std::string>{"z"});
    CHECK(split.in_vocabulary.empty());
    CHECK(split.out_of_vocabulary.size() == 2);
    split = split_iv_oov(std::vector<std::string>{}, vocab);
    CHECK(split.in_vocabulary.empty());
    CHECK(split.out_of_vocabulary.empty());
}

TEST_CASE("report scoring with vocabulary split")
{
    const std::set<std::string> vocab{"asl"};
    std::vector<Prediction> p{{"asl", "asl"}, {"hello", "hell"}};
    const EvalReport r = score_predictions(p, &vocab);
    CHECK(r.iv_acc.value() == 1.0);
    CHECK(r.oov_acc.value() == doctest::Approx(0.8));
    CHECK(r.top1 == 0.5);
    const auto j = to_json(r);
    for (const char* key : {"letter_acc", "top1", "hand_det_acc", "iv_acc", "oov_acc", "speed", "noise_sweep"}) {
        CHECK(j.contains(key));
    }
    CHECK(score_predictions(p, nullptr).iv_acc.has_value() == false);
}

TEST_CASE("noise levels")
{
    const auto levels = default_noise_levels();
    REQUIRE(levels.size() == 11);
    CHECK(levels.front() == 0.0);
    CHECK(levels.back() == doctest::Approx(0.10));
}

TEST_CASE("speed report is reciprocal-consistent")
{
    SpeedReport r;
    r.samples = 50;
    r.t_lat = 0.25;
    r.r_tp = r.samples / r.t_lat;
    CHECK(r.r_tp * r.t_lat == doctest::Approx(50.0));
    const auto j = to_json(r);
    CHECK(j.contains("FPS"));
    CHECK(j["hardware"].is_object());
}
