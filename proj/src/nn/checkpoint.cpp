#include "fslab/nn/checkpoint.hpp"

#include "fslab/core/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace fslab::nn {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'L', 'A', 'B', 'C', 'K', '1'};

struct RawCheckpoint {
    nlohmann::json header;
    std::streampos data_start;
};

RawCheckpoint open_raw(std::ifstream& in, const std::filesystem::path& path)
{
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw CheckpointMismatch("not a checkpoint file: " + path.string());
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
        throw CheckpointMismatch("truncated checkpoint header: " + path.string());
    }
    return {nlohmann::json::parse(text), in.tellg()};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const ParamList& params)
{
    nlohmann::json j;
    j["kind"] = header.kind;
    j["config"] = header.config;
    j["charset_hash"] = header.charset_hash;
    j["params"] = nlohmann::json::array();
    for (const auto& [name, p] : params.items()) {
        j["params"].push_back({{"name", name}, {"rows", p.rows()}, {"cols", p.cols()}});
    }
    const std::string text = j.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, p] : params.items()) {
        out.write(reinterpret_cast<const char*>(p.value().data()),
                  static_cast<std::streamsize>(p.value().size() * sizeof(double)));
    }
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    auto raw = open_raw(in, path);
    return {raw.header.at("kind").get<std::string>(), raw.header.at("config"),
            raw.header.at("charset_hash").get<std::string>()};
}

void load_checkpoint_params(const std::filesystem::path& path, const ParamList& params)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    auto raw = open_raw(in, path);
    const auto& stored = raw.header.at("params");
    if (stored.size() != params.items().size()) {
        throw CheckpointMismatch("checkpoint parameter count differs from model");
    }
    for (std::size_t i = 0; i < stored.size(); ++i) {
        const auto& [name, p] = params.items()[i];
        if (stored[i].at("name") != name || stored[i].at("rows") != p.rows() || stored[i].at("cols") != p.cols()) {
            throw CheckpointMismatch("checkpoint tensor mismatch at " + name);
        }
        Var target = p;
        Mat& value = target.mutable_value();
        if (!in.read(reinterpret_cast<char*>(value.data()),
                     static_cast<std::streamsize>(value.size() * sizeof(double)))) {
            throw CheckpointMismatch("truncated checkpoint data at " + name);
        }
    }
}

}  // namespace fslab::nn
