#include "fslab/core/pose_io.hpp"

#include <fstream>

namespace fslab {

using nlohmann::json;

namespace {

json labels_to_json(const FrameLabels& labels, const Charset& charset)
{
    json arr = json::array();
    for (int l : labels.labels) arr.push_back(charset.label_symbol(l));
    return arr;
}

FrameLabels labels_from_json(const json& arr, const Charset& charset)
{
    FrameLabels out;
    for (const auto& s : arr) out.labels.push_back(charset.label_id(s.get<std::string>()));
    return out;
}

json identity_to_json(const HandIdentity& who)
{
    return {{"person", who.person_id}, {"side", to_string(who.side)}};
}

HandIdentity identity_from_json(const json& j)
{
    HandIdentity who;
    who.person_id = j.at("person").get<int>();
    if (who.person_id < 0) throw DataError("negative person id");
    who.side = side_from_string(j.at("side").get<std::string>());
    return who;
}

}  // namespace

json pose_to_json(const PoseSequence& seq, const Charset& charset)
{
    json j;
    j["id"] = seq.id;
    j["word"] = seq.word;
    j["tracks"] = json::array();
    for (const auto& t : seq.tracks) {
        json frames = json::array();
        for (int f = 0; f < t.frame_count(); ++f) {
            json joints = json::array();
            for (int k = 0; k < kJoints; ++k) {
                json p = json::array();
                for (int a = 0; a < t.dims; ++a) p.push_back(t.at(f, k, a));
                joints.push_back(std::move(p));
            }
            frames.push_back(std::move(joints));
        }
        json track = identity_to_json(t.identity);
        track["frames"] = std::move(frames);
        j["tracks"].push_back(std::move(track));
    }
    j["frame_labels"] = seq.frame_labels ? labels_to_json(*seq.frame_labels, charset) : json(nullptr);
    j["signing_hand"] = seq.signing_hand ? identity_to_json(*seq.signing_hand) : json(nullptr);
    if (!seq.source.empty()) j["source"] = seq.source;
    return j;
}

PoseSequence pose_from_json(const json& j, const Charset& charset)
{
    PoseSequence seq;
    seq.id = j.at("id").get<std::string>();
    seq.word = j.at("word").get<std::string>();
    for (const auto& tj : j.at("tracks")) {
        HandTrack t;
        t.identity = identity_from_json(tj);
        const auto& frames = tj.at("frames");
        if (frames.empty()) throw DataError(seq.id + ": track without frames");
        t.dims = static_cast<int>(frames.at(0).at(0).size());
        t.frames.resize(static_cast<Eigen::Index>(frames.size()), kJoints * t.dims);
        for (std::size_t f = 0; f < frames.size(); ++f) {
            if (frames[f].size() != kJoints) throw DataError(seq.id + ": frame must hold 21 joints");
            for (int k = 0; k < kJoints; ++k) {
                const auto& p = frames[f][static_cast<std::size_t>(k)];
                if (static_cast<int>(p.size()) != t.dims) throw DataError(seq.id + ": inconsistent coordinate size");
                for (int a = 0; a < t.dims; ++a) t.at(static_cast<int>(f), k, a) = p[static_cast<std::size_t>(a)].get<double>();
            }
        }
        seq.tracks.push_back(std::move(t));
    }
    if (j.contains("frame_labels") && !j["frame_labels"].is_null()) {
        seq.frame_labels = labels_from_json(j["frame_labels"], charset);
    }
    if (j.contains("signing_hand") && !j["signing_hand"].is_null()) {
        seq.signing_hand = identity_from_json(j["signing_hand"]);
    }
    if (j.contains("source")) seq.source = j["source"].get<std::string>();
    seq.validate(charset);
    return seq;
}

void write_dataset(const std::filesystem::path& path, std::span<const PoseSequence> data, const Charset& charset)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset: " + path.string());
    write_dataset(out, data, charset);
}

void write_dataset(std::ostream& out, std::span<const PoseSequence> data, const Charset& charset)
{
    for (const auto& seq : data) out << pose_to_json(seq, charset).dump() << '\n';
}

std::vector<PoseSequence> read_dataset(const std::filesystem::path& path, const Charset& charset)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path.string());
    std::vector<PoseSequence> data;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            data.push_back(pose_from_json(json::parse(line), charset));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return data;
}

void write_frame_labels(const std::filesystem::path& path, std::span<const LabeledFrames> rows,
                        const Charset& charset)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write frame labels: " + path.string());
    for (const auto& r : rows) {
        json j;
        j["id"] = r.id;
        j["labels"] = labels_to_json(r.labels, charset);
        out << j.dump() << '\n';
    }
}

std::vector<LabeledFrames> read_frame_labels(const std::filesystem::path& path, const Charset& charset)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open frame labels: " + path.string());
    std::vector<LabeledFrames> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            rows.push_back({j.at("id").get<std::string>(), labels_from_json(j.at("labels"), charset)});
        } catch (const json::exception& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }
    return rows;
}

std::vector<std::string> read_word_list(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open word list: " + path.string());
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    return words;
}

void write_word_list(const std::filesystem::path& path, std::span<const std::string> words)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write word list: " + path.string());
    for (const auto& w : words) out << w << '\n';
}

}  // namespace fslab
