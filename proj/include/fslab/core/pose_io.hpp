#pragma once

#include "fslab/core/pose.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

namespace fslab {

// Pose datasets are JSON-lines, one sequence per line:
// {"id","word","tracks":[{"person":0,"side":"right","frames":[[[x,y],...x21],...xT]}],
//  "frame_labels":["a","_",...]|null,"signing_hand":{"person","side"}|null[,"source"]}

nlohmann::json pose_to_json(const PoseSequence& seq, const Charset& charset);
PoseSequence pose_from_json(const nlohmann::json& j, const Charset& charset);

void write_dataset(const std::filesystem::path& path, std::span<const PoseSequence> data, const Charset& charset);
void write_dataset(std::ostream& out, std::span<const PoseSequence> data, const Charset& charset);
std::vector<PoseSequence> read_dataset(const std::filesystem::path& path, const Charset& charset);

/// Frame-label files: {"id","labels":["a","_",...]} per line.
struct LabeledFrames {
    std::string id;
    FrameLabels labels;
};

void write_frame_labels(const std::filesystem::path& path, std::span<const LabeledFrames> rows,
                        const Charset& charset);
std::vector<LabeledFrames> read_frame_labels(const std::filesystem::path& path, const Charset& charset);

/// Plain-text word lists, one lowercase word per line; blank lines are skipped.
std::vector<std::string> read_word_list(const std::filesystem::path& path);
void write_word_list(const std::filesystem::path& path, std::span<const std::string> words);

}  // namespace fslab
