#pragma once

#include "fslab/core/charset.hpp"
#include "fslab/core/matrix.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fslab {

inline constexpr int kJoints = 21;

enum class Side { right, left };

struct HandIdentity {
    int person_id = 0;
    Side side = Side::right;

    /// 2 * person + (0 right, 1 left).
    int hand_index() const { return 2 * person_id + (side == Side::right ? 0 : 1); }
    static HandIdentity from_index(int hand_index);

    friend bool operator==(const HandIdentity&, const HandIdentity&) = default;
};

std::string to_string(Side side);
Side side_from_string(const std::string& text);

/// One hand over time. Each row of `frames` is one frame with joints laid out
/// joint-major: x0 y0 [z0] x1 y1 [z1] ...
struct HandTrack {
    HandIdentity identity;
    int dims = 2;
    Matrix frames;  // [T x kJoints*dims]

    int frame_count() const { return static_cast<int>(frames.rows()); }
    double& at(int frame, int joint, int axis) { return frames(frame, joint * dims + axis); }
    double at(int frame, int joint, int axis) const { return frames(frame, joint * dims + axis); }
};

/// Per-frame letter id or Charset::blank_id().
struct FrameLabels {
    std::vector<int> labels;

    friend bool operator==(const FrameLabels&, const FrameLabels&) = default;
};

struct PoseSequence {
    std::string id;
    std::string word;
    std::vector<HandTrack> tracks;
    std::optional<FrameLabels> frame_labels;
    std::optional<HandIdentity> signing_hand;
    std::string source;  // empty for ordinary data, "generated" for sampler output

    int frame_count() const { return tracks.empty() ? 0 : tracks.front().frame_count(); }
    int hand_count() const { return static_cast<int>(tracks.size()); }
    const HandTrack* find_track(const HandIdentity& who) const;

    /// Throws DataError when the structural invariants do not hold.
    void validate(const Charset& charset) const;
};

enum class NormalizeMode {
    clip,       // one center/scale over every joint of every frame of the track
    per_frame,  // independent center/scale per frame
};

/// Centers on the per-axis min/max midpoint, divides by the largest absolute
/// coordinate and multiplies by 0.5. Zero-extent input yields zeros and
/// appends a message to `warnings` when given.
HandTrack normalize_track(const HandTrack& track, NormalizeMode mode = NormalizeMode::clip,
                          std::vector<std::string>* warnings = nullptr);

PoseSequence normalize_sequence(const PoseSequence& seq, NormalizeMode mode = NormalizeMode::clip,
                                std::vector<std::string>* warnings = nullptr);

/// Drops every axis beyond the first two.
HandTrack project_to_2d(const HandTrack& track);

/// Frame-wise multi-hand token layout: tracks sorted by hand index, then all
/// frames of the first hand, all frames of the second, and so on.
struct AssembledTokens {
    Matrix tokens;                    // [T_total x kJoints*dims]
    std::vector<int> frame_index;     // original frame of each token
    std::vector<int> hand_of_token;   // column of hand_membership
    Matrix hand_membership;           // one-hot [T_total x N]
    std::vector<HandIdentity> hands;  // identity of each column
    std::vector<int> track_of_hand;   // index into PoseSequence::tracks for each column

    int total() const { return static_cast<int>(frame_index.size()); }
    int hand_count() const { return static_cast<int>(hands.size()); }
};

AssembledTokens assemble_tokens(const PoseSequence& seq);

}  // namespace fslab
