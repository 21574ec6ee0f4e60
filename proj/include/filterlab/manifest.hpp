#pragma once

// Run artifacts: files written once into an output directory, each recorded
// with its SHA-256. manifest.json depends only on (config, seed, command,
// version); wall-clock stage timings go to timings.json next to it.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "filterlab/config.hpp"
#include "filterlab/errors.hpp"

#ifndef FILTERLAB_VERSION
#define FILTERLAB_VERSION "0.0.0"
#endif

namespace filterlab {

inline std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
    return os.str();
}

inline std::string config_hash(const ExperimentConfig& c) { return sha256_hex(c.canonical().dump()); }

struct ArtifactRecord {
    std::string name;
    std::size_t bytes = 0;
    std::string sha256;
};

/// Single writer for one run's output directory.
class RunOutput {
public:
    RunOutput(std::filesystem::path dir, std::string command, const ExperimentConfig& config)
        : dir_(std::move(dir)), command_(std::move(command)), config_(config.canonical()),
          seed_(config.seed), start_(std::chrono::steady_clock::now())
    {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ConfigError("--out: cannot create '" + dir_.string() + "': " + ec.message());
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }
    const std::vector<ArtifactRecord>& files() const noexcept { return files_; }

    /// Write `content` to dir/name and record its checksum.
    void write(const std::string& name, const std::string& content)
    {
        for (const auto& f : files_)
            if (f.name == name) throw std::logic_error("output file written twice: " + name);
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        out << content;
        if (!out) throw std::runtime_error("write failed: " + (dir_ / name).string());
        files_.push_back({name, content.size(), sha256_hex(content)});
    }

    /// Render with `fn(std::ostream&)` and write.
    template <class Fn>
    void write_with(const std::string& name, Fn&& fn)
    {
        std::ostringstream os;
        fn(os);
        write(name, os.str());
    }

    /// Close the current stage at the elapsed wall-clock time.
    void stage(const std::string& name)
    {
        const auto now = std::chrono::steady_clock::now();
        stages_.emplace_back(name, std::chrono::duration<double>(now - last_).count());
        last_ = now;
    }

    nlohmann::json manifest() const
    {
        nlohmann::json files = nlohmann::json::array();
        for (const auto& f : files_) files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
        return {{"tool", "filterlab"},
                {"version", FILTERLAB_VERSION},
                {"command", command_},
                {"seed", seed_},
                {"config_sha256", sha256_hex(config_.dump())},
                {"config", config_},
                {"files", files}};
    }

    /// Write manifest.json (deterministic) and timings.json (wall clock).
    void finish()
    {
        const std::string m = manifest().dump(2) + "\n";
        std::ofstream(dir_ / "manifest.json", std::ios::binary) << m;
        nlohmann::json t = nlohmann::json::object();
        for (const auto& [name, s] : stages_) t[name] = s;
        t["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ofstream(dir_ / "timings.json", std::ios::binary) << t.dump(2) << "\n";
    }

private:
    std::filesystem::path dir_;
    std::string command_;
    nlohmann::json config_;
    std::uint64_t seed_;
    std::chrono::steady_clock::time_point start_;
    std::chrono::steady_clock::time_point last_ = start_;
    std::vector<ArtifactRecord> files_;
    std::vector<std::pair<std::string, double>> stages_;
};

}  // namespace filterlab
