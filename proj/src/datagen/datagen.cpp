#include "fslab/datagen/datagen.hpp"

#include "fslab/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fslab::datagen {

Matrix canonical_skeleton()
{
    Matrix s = Matrix::Zero(1, kJoints * 3);
    // Thumb leans sideways, the four fingers fan out upwards.
    const double base_x[5] = {-0.35, -0.18, 0.0, 0.18, 0.34};
    const double base_y[5] = {0.15, 0.45, 0.5, 0.45, 0.38};
    const double dir_x[5] = {-0.18, -0.04, 0.0, 0.04, 0.08};
    const double dir_y[5] = {0.12, 0.22, 0.24, 0.22, 0.18};
    for (int f = 0; f < 5; ++f) {
        for (int k = 0; k < 4; ++k) {
            const int j = 1 + f * 4 + k;
            s(0, j * 3) = base_x[f] + k * dir_x[f];
            s(0, j * 3 + 1) = base_y[f] + k * dir_y[f];
            s(0, j * 3 + 2) = 0.02 * k;
        }
    }
    return s;
}

TemplateBank::TemplateBank(const Charset& charset, std::uint64_t seed, const TemplateOptions& options)
    : charset_(charset), options_(options)
{
    if (options.dims != 2 && options.dims != 3) throw ConfigError("templates: dims must be 2 or 3");
    if (options.transition_frames < 0) throw ConfigError("templates: transition_frames must be non-negative");
    if (options.jitter_sigma < 0.0) throw ConfigError("templates: jitter_sigma must be non-negative");
    if (options.offset_scale <= 0.0) throw ConfigError("templates: offset_scale must be positive");
    Rng rng = make_rng(seed, "templates");
    std::uniform_real_distribution<double> offset(-options.offset_scale, options.offset_scale);
    const Matrix skeleton = canonical_skeleton();
    for (int id = 0; id < charset.letter_count(); ++id) {
        Matrix full = skeleton;
        for (int j = 1; j < kJoints; ++j) {
            for (int a = 0; a < 3; ++a) full(0, j * 3 + a) += offset(rng);
        }
        Matrix pose(1, kJoints * options.dims);
        for (int j = 0; j < kJoints; ++j) {
            for (int a = 0; a < options.dims; ++a) pose(0, j * options.dims + a) = full(0, j * 3 + a);
        }
        poses_.push_back(std::move(pose));
    }
    if (min_pairwise_distance() <= 10.0 * options.jitter_sigma) {
        throw ConfigError("templates: letters are not separable at this jitter level");
    }
}

const Matrix& TemplateBank::pose(int letter_id) const
{
    if (!charset_.is_letter(letter_id)) throw std::out_of_range("templates: not a letter id");
    return poses_[static_cast<std::size_t>(letter_id)];
}

double TemplateBank::min_pairwise_distance() const
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poses_.size(); ++i) {
        for (std::size_t j = i + 1; j < poses_.size(); ++j) best = std::min(best, (poses_[i] - poses_[j]).norm());
    }
    return best;
}

int TemplateBank::nearest(const Matrix& frame) const
{
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poses_.size(); ++i) {
        const double d = (poses_[i] - frame).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

std::vector<int> draw_repeats(std::string_view word, const Charset& charset, Rng& rng, const Repeats& ranges)
{
    const auto ids = charset.encode_letters(word);
    std::uniform_int_distribution<int> letter(ranges.letter_min, ranges.letter_max);
    std::uniform_int_distribution<int> space(ranges.space_min, ranges.space_max);
    std::vector<int> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(id == charset.space_id() ? space(rng) : letter(rng));
    return out;
}

std::vector<int> expand_frame_letters(std::string_view word, std::span<const int> repeats, const Charset& charset,
                                      int transition_frames)
{
    const auto ids = charset.encode_letters(word);
    if (ids.empty()) throw DataError("empty word");
    if (repeats.size() != ids.size()) throw DataError("one repeat count per letter required");
    std::vector<int> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (repeats[i] < 1) throw DataError("repeat counts must be positive");
        if (i > 0) out.insert(out.end(), static_cast<std::size_t>(transition_frames), charset.blank_id());
        out.insert(out.end(), static_cast<std::size_t>(repeats[i]), ids[i]);
    }
    return out;
}

PoseSequence synth_sequence_with_repeats(std::string_view word, std::span<const int> repeats,
                                         const TemplateBank& bank, Rng& rng, bool normalize)
{
    const Charset& cs = bank.charset();
    const int tf = bank.options().transition_frames;
    const std::vector<int> labels = expand_frame_letters(word, repeats, cs, tf);
    const auto ids = cs.encode_letters(word);
    const int dims = bank.dims();
    std::normal_distribution<double> jitter(0.0, 1.0);
    const double sigma = bank.options().jitter_sigma;

    HandTrack track;
    track.dims = dims;
    track.frames.resize(static_cast<Eigen::Index>(labels.size()), kJoints * dims);
    Eigen::Index row = 0;
    auto emit = [&](const Matrix& pose) {
        track.frames.row(row) = pose;
        if (sigma > 0.0) {
            for (int c = 0; c < kJoints * dims; ++c) track.frames(row, c) += sigma * jitter(rng);
        }
        ++row;
    };
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) {
            const Matrix& a = bank.pose(ids[i - 1]);
            const Matrix& b = bank.pose(ids[i]);
            for (int k = 1; k <= tf; ++k) {
                const double w = static_cast<double>(k) / (tf + 1);
                emit((1.0 - w) * a + w * b);
            }
        }
        for (int r = 0; r < repeats[i]; ++r) emit(bank.pose(ids[i]));
    }

    PoseSequence seq;
    seq.id = std::string(word);
    seq.word = std::string(word);
    seq.tracks.push_back(normalize ? normalize_track(track) : track);
    seq.frame_labels = FrameLabels{labels};
    seq.signing_hand = track.identity;
    return seq;
}

PoseSequence synth_sequence(std::string_view word, const TemplateBank& bank, Rng& rng, const SynthOptions& options)
{
    const auto repeats = draw_repeats(word, bank.charset(), rng, options.repeats);
    return synth_sequence_with_repeats(word, repeats, bank, rng, options.normalize);
}

std::vector<std::string> random_words(std::size_t count, Rng& rng, int min_len, int max_len)
{
    if (min_len < 1 || max_len < min_len) throw ConfigError("random_words: invalid length range");
    std::uniform_int_distribution<int> len(min_len, max_len);
    std::uniform_int_distribution<int> letter(0, 25);
    std::set<std::string> seen;
    std::vector<std::string> out;
    std::size_t attempts = 0;
    while (out.size() < count) {
        if (++attempts > 100 * count + 1000) throw ConfigError("random_words: cannot draw enough distinct words");
        std::string w(static_cast<std::size_t>(len(rng)), 'a');
        for (char& c : w) c = static_cast<char>('a' + letter(rng));
        if (seen.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

namespace {

HandTrack to_2d_normalized(const HandTrack& track)
{
    return normalize_track(project_to_2d(track));
}

}  // namespace

PoseSequence project_sequence_2d(const PoseSequence& seq)
{
    PoseSequence out = seq;
    for (auto& track : out.tracks) {
        if (track.dims != 2) track = to_2d_normalized(track);
    }
    return out;
}

Benchmark build_benchmark(std::span<const std::string> words, const TemplateBank& bank, std::uint64_t seed,
                          const BenchmarkOptions& options)
{
    if (options.per_word < 1) throw ConfigError("benchmark: per_word must be positive");
    if (options.dims != 2 && options.dims != 3) throw ConfigError("benchmark: dims must be 2 or 3");
    if (!options.sampler && bank.dims() < options.dims) throw ConfigError("benchmark: templates have too few dims");
    Benchmark out;
    const std::uint64_t base = fork_seed(seed, "benchmark");
    std::size_t index = 0;
    for (const auto& word : words) {
        if (options.exclude.count(word) != 0) {
            out.excluded_words.push_back(word);
            continue;
        }
        for (int k = 0; k < options.per_word; ++k, ++index) {
            Rng rng(mix64(base + index));
            PoseSequence seq;
            if (options.sampler) {
                const auto repeats = draw_repeats(word, bank.charset(), rng, options.repeats);
                const auto letters =
                    expand_frame_letters(word, repeats, bank.charset(), bank.options().transition_frames);
                HandTrack track;
                track.dims = 3;
                track.frames = options.sampler(letters, rng);
                if (track.frames.rows() != static_cast<Eigen::Index>(letters.size()) ||
                    track.frames.cols() != kJoints * 3) {
                    throw DataError("benchmark: sampler returned the wrong shape");
                }
                seq.word = word;
                seq.tracks.push_back(normalize_track(track));
                seq.frame_labels = FrameLabels{letters};
                seq.signing_hand = track.identity;
                seq.source = "generated";
            } else {
                seq = synth_sequence(word, bank, rng, {options.repeats, true});
            }
            if (options.dims == 2 && seq.tracks.front().dims == 3) {
                seq.tracks.front() = to_2d_normalized(seq.tracks.front());
            }
            char buf[32];
            std::snprintf(buf, sizeof buf, "-%06zu", index);
            seq.id = options.id_prefix + buf;
            out.samples.push_back(std::move(seq));
        }
    }
    return out;
}

double mean_displacement(const HandTrack& track)
{
    const int t = track.frame_count();
    if (t < 2) return 0.0;
    double total = 0.0;
    for (int f = 1; f < t; ++f) {
        for (int j = 0; j < kJoints; ++j) {
            double sq = 0.0;
            for (int a = 0; a < track.dims; ++a) {
                const double d = track.at(f, j, a) - track.at(f - 1, j, a);
                sq += d * d;
            }
            total += std::sqrt(sq);
        }
    }
    return total / ((t - 1) * kJoints);
}

HandIdentity most_moving_hand(const PoseSequence& seq)
{
    if (seq.tracks.empty()) throw DataError(seq.id + ": no hand tracks");
    const HandTrack* best = &seq.tracks.front();
    double best_d = -1.0;
    for (const auto& t : seq.tracks) {
        const double d = mean_displacement(t);
        if (d > best_d) {
            best_d = d;
            best = &t;
        }
    }
    return best->identity;
}

PoseSequence add_distractor_hand(const PoseSequence& seq, const TemplateBank& bank, Rng& rng, double motion_scale)
{
    if (seq.hand_count() != 1) throw DataError(seq.id + ": distractor needs a single-hand sequence");
    if (motion_scale < 0.0) throw ConfigError("distractor: motion_scale must be non-negative");
    const HandTrack& signing = seq.tracks.front();
    const int dims = signing.dims;
    const int frames = signing.frame_count();

    std::bernoulli_distribution coin(0.5);
    const Side signing_side = coin(rng) ? Side::right : Side::left;
    const Side other_side = signing_side == Side::right ? Side::left : Side::right;

    // The idle hand keeps the neutral skeleton shape, which no letter uses.
    const Matrix skeleton = canonical_skeleton();
    Matrix base(1, kJoints * dims);
    for (int j = 0; j < kJoints; ++j) {
        for (int a = 0; a < dims; ++a) base(0, j * dims + a) = skeleton(0, j * 3 + a);
    }

    // Smooth trajectory: three sinusoids per axis for the whole hand plus a
    // per-finger wobble, each with a period of 8 to 20 frames.
    std::uniform_real_distribution<double> period(8.0, 20.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> weight(0.5, 1.0);
    Matrix path = Matrix::Zero(frames, kJoints * dims);
    for (int a = 0; a < dims; ++a) {
        for (int k = 0; k < 3; ++k) {
            const double w = 2.0 * std::numbers::pi / period(rng);
            const double ph = phase(rng);
            const double c = weight(rng);
            for (int f = 0; f < frames; ++f) {
                const double v = c * std::sin(w * f + ph);
                for (int j = 0; j < kJoints; ++j) path(f, j * dims + a) += v;
            }
        }
    }
    for (int finger = 0; finger < 5; ++finger) {
        for (int a = 0; a < dims; ++a) {
            const double w = 2.0 * std::numbers::pi / period(rng);
            const double ph = phase(rng);
            for (int f = 0; f < frames; ++f) {
                const double v = 0.3 * std::sin(w * f + ph);
                for (int k = 0; k < 4; ++k) path(f, (1 + finger * 4 + k) * dims + a) += v * (k + 1) / 4.0;
            }
        }
    }
    Matrix noise(frames, kJoints * dims);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = bank.options().jitter_sigma * jitter(rng);

    HandTrack distractor;
    distractor.identity = {signing.identity.person_id, other_side};
    distractor.dims = dims;
    auto build = [&](double amplitude) {
        HandTrack t = distractor;
        t.frames = base.replicate(frames, 1) + amplitude * path + noise;
        return normalize_track(t);
    };

    const double target = motion_scale * mean_displacement(signing);
    double lo = 0.0;
    double hi = 0.1;
    for (int i = 0; i < 20 && mean_displacement(build(hi)) < target; ++i) hi *= 2.0;
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mean_displacement(build(mid)) < target ? lo : hi) = mid;
    }

    PoseSequence out = seq;
    out.tracks.front().identity.side = signing_side;
    out.signing_hand = out.tracks.front().identity;
    out.tracks.push_back(build(hi));
    return out;
}

PoseSequence perturb_poses(const PoseSequence& seq, double sigma, Rng& rng)
{
    if (sigma < 0.0) throw ConfigError("perturb: sigma must be non-negative");
    PoseSequence out = seq;
    if (sigma == 0.0) return out;
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& t : out.tracks) {
        for (Eigen::Index i = 0; i < t.frames.size(); ++i) t.frames.data()[i] += noise(rng);
    }
    return out;
}

}  // namespace fslab::datagen
