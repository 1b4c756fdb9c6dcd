#pragma once

#include "fslab/cli/config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fslab::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2,
    exit_data = 3,
    exit_checkpoint = 4,
    exit_runtime = 5,
};

/// Per-run record written to <out>/manifest.json.
class Manifest {
public:
    Manifest(std::string command, const RunConfig& config, std::uint64_t seed);

    void input(const std::filesystem::path& path);
    void output(const std::filesystem::path& path);
    nlohmann::json& metrics() { return metrics_; }
    nlohmann::json to_json() const;
    void write(const std::filesystem::path& out_dir) const;

private:
    std::string command_;
    nlohmann::json config_;
    std::string config_hash_;
    std::uint64_t seed_;
    nlohmann::json inputs_ = nlohmann::json::object();
    nlohmann::json outputs_ = nlohmann::json::object();
    nlohmann::json metrics_ = nlohmann::json::object();
};

std::string git_describe();

/// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace fslab::cli
