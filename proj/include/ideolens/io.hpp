#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ideolens {

// All artifact writes go through here: write to a sibling temp file, then
// rename over the target, so readers never observe a half-written file.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

std::vector<std::string> read_lines(const std::filesystem::path& path);

// RFC-4180 style quoting, applied only when the field needs it.
std::string csv_escape(const std::string& field);

std::vector<std::string> csv_split(const std::string& line);

// Leading comment line carried by every CSV artifact.
std::string csv_meta_line(std::uint64_t config_hash, std::uint64_t seed);

// Canonical dump (sorted keys, no whitespace) used both for hashing and for
// byte-stable JSON artifacts.
std::string canonical_json(const nlohmann::json& j);

std::uint64_t config_hash(const nlohmann::json& config);

// Adds {"_meta": {"config_hash": ..., "seed": ...}} and writes atomically.
void write_json_artifact(const std::filesystem::path& path, nlohmann::json j,
                         std::uint64_t config_hash, std::uint64_t seed);

}  // namespace ideolens
