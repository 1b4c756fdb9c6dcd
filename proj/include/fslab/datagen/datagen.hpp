#pragma once

#include "fslab/core/charset.hpp"
#include "fslab/core/pose.hpp"
#include "fslab/core/random.hpp"

#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fslab::datagen {

struct TemplateOptions {
    int dims = 3;
    int transition_frames = 1;
    double jitter_sigma = 0.01;
    double offset_scale = 0.25;  // joint offsets around the canonical skeleton
};

/// One canonical pose per letter, generated from a seed.
class TemplateBank {
public:
    TemplateBank(const Charset& charset, std::uint64_t seed, const TemplateOptions& options = {});

    const Charset& charset() const { return charset_; }
    const TemplateOptions& options() const { return options_; }
    int dims() const { return options_.dims; }
    /// [1 x kJoints*dims]
    const Matrix& pose(int letter_id) const;
    double min_pairwise_distance() const;
    /// Letter whose template is closest (Euclidean) to `frame`.
    int nearest(const Matrix& frame) const;

private:
    Charset charset_;
    TemplateOptions options_;
    std::vector<Matrix> poses_;
};

/// Canonical hand skeleton in 3D: wrist, then four joints per finger.
Matrix canonical_skeleton();

struct Repeats {
    int letter_min = 3, letter_max = 10;
    int space_min = 2, space_max = 3;
};

/// Per-letter repeat counts drawn from the letter or space range.
std::vector<int> draw_repeats(std::string_view word, const Charset& charset, Rng& rng, const Repeats& ranges = {});

/// Frame-wise letters for `word`: each letter repeated, `transition_frames`
/// blanks between consecutive letters.
std::vector<int> expand_frame_letters(std::string_view word, std::span<const int> repeats, const Charset& charset,
                                      int transition_frames);

struct SynthOptions {
    Repeats repeats;
    bool normalize = true;
};

/// Single right-hand sequence with ground-truth frame labels.
PoseSequence synth_sequence(std::string_view word, const TemplateBank& bank, Rng& rng,
                            const SynthOptions& options = {});
/// Same, with explicit repeat counts.
PoseSequence synth_sequence_with_repeats(std::string_view word, std::span<const int> repeats,
                                         const TemplateBank& bank, Rng& rng, bool normalize = true);

/// Seeded list of distinct words made of lowercase letters.
std::vector<std::string> random_words(std::size_t count, Rng& rng, int min_len = 3, int max_len = 8);

/// Maps expanded frame letters to a [T x kJoints*3] pose track.
using FrameSampler = std::function<Matrix(const std::vector<int>& frame_letters, Rng& rng)>;

struct BenchmarkOptions {
    int per_word = 5;
    int dims = 3;
    Repeats repeats;
    std::set<std::string> exclude;  // words that must not appear
    FrameSampler sampler;           // empty: template oracle mode
    std::string id_prefix = "bench";
};

struct Benchmark {
    std::vector<PoseSequence> samples;
    std::vector<std::string> excluded_words;
};

/// |words| * per_word samples, one independent stream per sample.
Benchmark build_benchmark(std::span<const std::string> words, const TemplateBank& bank, std::uint64_t seed,
                          const BenchmarkOptions& options = {});

/// Appends a non-signing hand of the same person moving smoothly. After
/// per-track normalization its mean frame-to-frame displacement is
/// `motion_scale` times that of the signing hand. The signing side is drawn
/// uniformly; ground truth follows it.
PoseSequence add_distractor_hand(const PoseSequence& seq, const TemplateBank& bank, Rng& rng, double motion_scale);

/// Mean per-frame joint displacement of a track.
double mean_displacement(const HandTrack& track);

/// Hand with the largest mean displacement.
HandIdentity most_moving_hand(const PoseSequence& seq);

/// Drops every axis beyond x, y and renormalizes each track; 2D input is
/// returned unchanged.
PoseSequence project_sequence_2d(const PoseSequence& seq);

/// Adds sigma * N(0, 1) to every coordinate.
PoseSequence perturb_poses(const PoseSequence& seq, double sigma, Rng& rng);

}  // namespace fslab::datagen
