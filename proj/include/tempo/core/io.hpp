#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tempo {

inline constexpr std::string_view kToolName = "tempo";
inline constexpr std::string_view kToolVersion = "0.3.0";

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Provenance block written at the top of every output file.
nlohmann::json provenance(const nlohmann::json& resolved_config);

/// JSON Lines helpers. A first record of the form {"meta": {...}} is
/// provenance and is skipped by the reader.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records,
                 const nlohmann::json* meta = nullptr);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Shortest round-trip formatting for doubles.
std::string format_double(double value);

}  // namespace tempo
