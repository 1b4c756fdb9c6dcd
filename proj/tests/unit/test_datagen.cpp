#include "fslab/core/pose_io.hpp"
#include "fslab/datagen/datagen.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace fslab;
using namespace fslab::datagen;

namespace {

std::vector<int> collapse(const FrameLabels& labels, const Charset& cs)
{
    std::vector<int> out;
    int prev = -1;
    for (int l : labels.labels) {
        if (l != cs.blank_id() && l != prev) out.push_back(l);
        prev = l;
    }
    return out;
}

std::vector<int> ids_of(std::string_view w, const Charset& cs)
{
    std::vector<int> out;
    for (char c : w) out.push_back(*cs.id_of(c));
    return out;
}

}  // namespace

TEST_CASE("expand frame letters")
{
    const Charset cs;
    const int a = *cs.id_of('a'), b = *cs.id_of('b'), phi = cs.blank_id();
    const std::vector<int> reps{3, 4};
    CHECK(expand_frame_letters("ab", reps, cs, 1) == std::vector<int>{a, a, a, phi, b, b, b, b});
    CHECK(expand_frame_letters("ab", reps, cs, 0).size() == 7);
}

TEST_CASE("synth sequence with explicit repeats")
{
    const Charset cs;
    const TemplateBank bank(cs, 1, {2, 1, 0.01});
    Rng rng = make_rng(1, "synth");
    const std::vector<int> reps{3, 4};
    const auto s = synth_sequence_with_repeats("ab", reps, bank, rng);
    CHECK(s.frame_count() == 8);
    REQUIRE(s.frame_labels.has_value());
    CHECK(s.frame_labels->labels.size() == 8);
    CHECK(collapse(*s.frame_labels, cs) == ids_of("ab", cs));
    CHECK(s.signing_hand.has_value());
    CHECK_THROWS_AS(synth_sequence_with_repeats("a<b", reps, bank, rng), DataError);
}

TEST_CASE("noise-free sequence reproduces templates")
{
    const Charset cs;
    const TemplateBank bank(cs, 2, {3, 0, 0.0});
    Rng rng = make_rng(2, "exact");
    const std::vector<int> reps{2, 3, 2};
    const auto s = synth_sequence_with_repeats("cab", reps, bank, rng, false);
    const auto& labels = s.frame_labels->labels;
    for (int f = 0; f < s.frame_count(); ++f) {
        CHECK((s.tracks[0].frames.row(f) - bank.pose(labels[static_cast<std::size_t>(f)])).cwiseAbs().maxCoeff() ==
              0.0);
    }
}

TEST_CASE("synth labels collapse to the word")
{
    const Charset cs;
    const TemplateBank bank(cs, 3, {2, 1, 0.01});
    Rng rng = make_rng(3, "words");
    const auto words = random_words(50, rng, 2, 9);
    CHECK(words.size() == 50);
    CHECK(std::set<std::string>(words.begin(), words.end()).size() == 50);
    for (const auto& w : words) {
        const auto s = synth_sequence(w, bank, rng);
        CHECK(static_cast<int>(s.frame_labels->labels.size()) == s.frame_count());
        CHECK(collapse(*s.frame_labels, cs) == ids_of(w, cs));
        CHECK(s.tracks[0].frames.cwiseAbs().maxCoeff() <= 0.5 + 1e-12);
    }
}

TEST_CASE("repeat ranges")
{
    const Charset cs;
    Rng rng = make_rng(4, "repeats");
    for (int trial = 0; trial < 200; ++trial) {
        const auto reps = draw_repeats("a b", cs, rng);
        CHECK(reps[0] >= 3);
        CHECK(reps[0] <= 10);
        CHECK(reps[1] >= 2);
        CHECK(reps[1] <= 3);
    }
}

TEST_CASE("templates are separable by nearest neighbour")
{
    const Charset cs;
    for (int dims : {2, 3}) {
        const TemplateBank bank(cs, 5, {dims, 1, 0.01});
        CHECK(bank.min_pairwise_distance() > 0.0);
        Rng rng = make_rng(5, "separable");
        int wrong = 0, total = 0;
        for (int trial = 0; trial < 20; ++trial) {
            const auto s = synth_sequence(random_words(1, rng, 5, 8).front(), bank, rng, {{}, false});
            for (int f = 0; f < s.frame_count(); ++f) {
                const int truth = s.frame_labels->labels[static_cast<std::size_t>(f)];
                if (truth == cs.blank_id()) continue;
                ++total;
                wrong += bank.nearest(s.tracks[0].frames.row(f)) != truth;
            }
        }
        CHECK(total > 100);
        CHECK(wrong == 0);
    }
}

TEST_CASE("benchmark sizes and determinism")
{
    const Charset cs;
    const TemplateBank bank(cs, 6, {3, 1, 0.01});
    Rng rng = make_rng(6, "bench_words");
    const auto words = random_words(10, rng);
    const auto a = build_benchmark(words, bank, 42);
    CHECK(a.samples.size() == 50);
    const auto b = build_benchmark(words, bank, 42);
    std::ostringstream sa, sb;
    for (const auto& s : a.samples) sa << pose_to_json(s, cs).dump() << '\n';
    for (const auto& s : b.samples) sb << pose_to_json(s, cs).dump() << '\n';
    CHECK(sa.str() == sb.str());
    CHECK(a.samples.front().tracks.front().dims == 3);

    BenchmarkOptions opts;
    opts.exclude = {words[0], words[1]};
    const auto c = build_benchmark(words, bank, 42, opts);
    CHECK(c.samples.size() == 40);
    CHECK(c.excluded_words.size() == 2);
    for (const auto& s : c.samples) CHECK(opts.exclude.count(s.word) == 0);
}

TEST_CASE("benchmark uses the sampler when given")
{
    const Charset cs;
    const TemplateBank bank(cs, 7, {3, 1, 0.01});
    BenchmarkOptions opts;
    opts.per_word = 2;
    int calls = 0;
    opts.sampler = [&](const std::vector<int>& letters, Rng&) {
        ++calls;
        return Matrix::Constant(static_cast<Eigen::Index>(letters.size()), kJoints * 3, 0.25);
    };
    const std::vector<std::string> words{"ab", "cd"};
    const auto b = build_benchmark(words, bank, 1, opts);
    CHECK(calls == 4);
    CHECK(b.samples.size() == 4);
    CHECK(b.samples[0].frame_count() == static_cast<int>(b.samples[0].frame_labels->labels.size()));
}

TEST_CASE("distractor hand")
{
    const Charset cs;
    const TemplateBank bank(cs, 8, {2, 1, 0.01});
    Rng rng = make_rng(8, "distractor");
    int wrong = 0;
    int lefts = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const auto s = synth_sequence("hello", bank, rng);
        const auto d = add_distractor_hand(s, bank, rng, 2.0);
        REQUIRE(d.tracks.size() == 2);
        CHECK(d.tracks[0].frame_count() == d.tracks[1].frame_count());
        REQUIRE(d.signing_hand.has_value());
        lefts += d.signing_hand->side == Side::left;
        CHECK(d.frame_labels == s.frame_labels);
        const auto& sign = d.tracks[0].identity == *d.signing_hand ? d.tracks[0] : d.tracks[1];
        const auto& other = d.tracks[0].identity == *d.signing_hand ? d.tracks[1] : d.tracks[0];
        CHECK(mean_displacement(other) == doctest::Approx(2.0 * mean_displacement(sign)).epsilon(1e-6));
        wrong += most_moving_hand(d) != *d.signing_hand;
    }
    CHECK(wrong == 40);
    CHECK(lefts > 0);
    CHECK(lefts < 40);
}

TEST_CASE("pose perturbation")
{
    const Charset cs;
    const TemplateBank bank(cs, 9, {2, 1, 0.01});
    Rng rng = make_rng(9, "perturb");
    const auto s = synth_sequence("abcdefghij", bank, rng);
    CHECK(perturb_poses(s, 0.0, rng).tracks[0].frames == s.tracks[0].frames);

    double sum = 0.0, sq = 0.0;
    long n = 0;
    while (n < 100000) {
        const auto p = perturb_poses(s, 0.01, rng);
        const Matrix d = p.tracks[0].frames - s.tracks[0].frames;
        sum += d.sum();
        sq += d.squaredNorm();
        n += d.size();
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - mean * mean;
    CHECK(var == doctest::Approx(1e-4).epsilon(0.05));
}

TEST_CASE("2D projection of 3D data")
{
    const Charset cs;
    const TemplateBank bank(cs, 10, {3, 1, 0.01});
    Rng rng = make_rng(10, "project");
    const auto s = synth_sequence("abc", bank, rng);
    const auto p = project_sequence_2d(s);
    CHECK(p.tracks[0].dims == 2);
    CHECK(p.tracks[0].frames.cols() == kJoints * 2);
    CHECK(p.tracks[0].frames.cwiseAbs().maxCoeff() == doctest::Approx(0.5));
}
