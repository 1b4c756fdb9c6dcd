#include "fslab/core/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fslab {

HandIdentity HandIdentity::from_index(int hand_index)
{
    return {hand_index / 2, hand_index % 2 == 0 ? Side::right : Side::left};
}

std::string to_string(Side side) { return side == Side::right ? "right" : "left"; }

Side side_from_string(const std::string& text)
{
    if (text == "right") return Side::right;
    if (text == "left") return Side::left;
    throw DataError("invalid hand side '" + text + "'");
}

const HandTrack* PoseSequence::find_track(const HandIdentity& who) const
{
    for (const auto& t : tracks) {
        if (t.identity == who) return &t;
    }
    return nullptr;
}

void PoseSequence::validate(const Charset& charset) const
{
    if (word.empty()) throw DataError(id + ": empty word");
    charset.encode_letters(word);
    if (tracks.empty()) throw DataError(id + ": no hand tracks");
    const int t0 = tracks.front().frame_count();
    if (t0 < 1) throw DataError(id + ": zero frames");
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const auto& t = tracks[i];
        if (t.frame_count() != t0) throw DataError(id + ": tracks have different frame counts");
        if (t.dims != 2 && t.dims != 3) throw DataError(id + ": coordinates must be 2D or 3D");
        if (t.frames.cols() != kJoints * t.dims) throw DataError(id + ": frames must hold 21 joints");
        if (!t.frames.allFinite()) throw DataError(id + ": non-finite coordinate");
        for (std::size_t j = 0; j < i; ++j) {
            if (tracks[j].identity == t.identity) throw DataError(id + ": duplicate hand identity");
        }
    }
    if (frame_labels) {
        if (static_cast<int>(frame_labels->labels.size()) != t0) {
            throw DataError(id + ": frame label count differs from frame count");
        }
        for (int l : frame_labels->labels) {
            if (l != charset.blank_id() && !charset.is_letter(l)) throw DataError(id + ": invalid frame label");
        }
    }
}

namespace {

// Normalizes rows [begin, end) of `frames` in place; returns false on zero extent.
bool normalize_block(Matrix& frames, int dims, Eigen::Index begin, Eigen::Index count)
{
    auto block = frames.middleRows(begin, count);
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(dims, std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = -lo;
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (int j = 0; j < kJoints; ++j) {
            for (int a = 0; a < dims; ++a) {
                const double v = block(r, j * dims + a);
                lo(a) = std::min(lo(a), v);
                hi(a) = std::max(hi(a), v);
            }
        }
    }
    const Eigen::VectorXd center = 0.5 * (lo + hi);
    double max_abs = 0.0;
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (int j = 0; j < kJoints; ++j) {
            for (int a = 0; a < dims; ++a) {
                double& v = block(r, j * dims + a);
                v -= center(a);
                max_abs = std::max(max_abs, std::abs(v));
            }
        }
    }
    if (max_abs == 0.0) {
        block.setZero();
        return false;
    }
    block *= 0.5 / max_abs;
    return true;
}

}  // namespace

HandTrack normalize_track(const HandTrack& track, NormalizeMode mode, std::vector<std::string>* warnings)
{
    HandTrack out = track;
    if (out.frame_count() == 0) return out;
    const std::string who = "hand " + std::to_string(track.identity.hand_index());
    if (mode == NormalizeMode::clip) {
        if (!normalize_block(out.frames, out.dims, 0, out.frames.rows()) && warnings) {
            warnings->push_back("degenerate input: " + who + " has zero extent; emitted zeros");
        }
    } else {
        for (Eigen::Index r = 0; r < out.frames.rows(); ++r) {
            if (!normalize_block(out.frames, out.dims, r, 1) && warnings) {
                warnings->push_back("degenerate input: " + who + " frame " + std::to_string(r) +
                                    " has zero extent; emitted zeros");
            }
        }
    }
    return out;
}

PoseSequence normalize_sequence(const PoseSequence& seq, NormalizeMode mode, std::vector<std::string>* warnings)
{
    PoseSequence out = seq;
    for (auto& t : out.tracks) t = normalize_track(t, mode, warnings);
    return out;
}

HandTrack project_to_2d(const HandTrack& track)
{
    if (track.dims == 2) return track;
    HandTrack out;
    out.identity = track.identity;
    out.dims = 2;
    out.frames.resize(track.frames.rows(), kJoints * 2);
    for (Eigen::Index r = 0; r < track.frames.rows(); ++r) {
        for (int j = 0; j < kJoints; ++j) {
            out.frames(r, j * 2) = track.frames(r, j * track.dims);
            out.frames(r, j * 2 + 1) = track.frames(r, j * track.dims + 1);
        }
    }
    return out;
}

AssembledTokens assemble_tokens(const PoseSequence& seq)
{
    AssembledTokens out;
    const int n = seq.hand_count();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return seq.tracks[a].identity.hand_index() < seq.tracks[b].identity.hand_index();
    });

    Eigen::Index total = 0;
    Eigen::Index width = 0;
    for (const auto& t : seq.tracks) {
        total += t.frame_count();
        if (width != 0 && t.frames.cols() != width) {
            throw DataError(seq.id + ": tracks mix coordinate dimensions");
        }
        width = t.frames.cols();
    }
    out.tokens.resize(total, width);
    out.hand_membership = Matrix::Zero(total, n);
    out.frame_index.reserve(static_cast<std::size_t>(total));
    out.hand_of_token.reserve(static_cast<std::size_t>(total));
    Eigen::Index row = 0;
    for (int col = 0; col < n; ++col) {
        const HandTrack& t = seq.tracks[static_cast<std::size_t>(order[col])];
        out.hands.push_back(t.identity);
        out.track_of_hand.push_back(order[col]);
        out.tokens.middleRows(row, t.frame_count()) = t.frames;
        for (int f = 0; f < t.frame_count(); ++f, ++row) {
            out.frame_index.push_back(f);
            out.hand_of_token.push_back(col);
            out.hand_membership(row, col) = 1.0;
        }
    }
    return out;
}

}  // namespace fslab
