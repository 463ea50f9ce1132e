#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace tfx {

// Parse a config file by extension: .json via nlohmann, .toml via a minimal
// flat-table reader (bare keys, strings, numbers, booleans, homogeneous
// scalar arrays, one level of [section] nesting).
nlohmann::json load_config_file(const std::filesystem::path& path);

nlohmann::json parse_toml(const std::string& text, const std::string& context);

// Recognized schemas, by subcommand name: ingest, audit, counts, dgp,
// simulate, estimate, benchmark, report.
// Validation rejects unknown keys, checks types, applies defaults, and
// enforces required fields (the master seed where applicable).
nlohmann::json validate_config(const nlohmann::json& config, const std::string& schema_name);

// Merge CLI-flag overrides on top of file values (overrides win), then
// validate. Either input may be empty.
nlohmann::json resolve_config(const nlohmann::json& file_config, const nlohmann::json& overrides,
                              const std::string& schema_name);

// FNV-1a over the canonical (sorted-key) dump; stable across runs.
std::string config_hash_hex(const nlohmann::json& config);

}  // namespace tfx
