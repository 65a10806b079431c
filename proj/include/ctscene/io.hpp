#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace ctscene {

inline constexpr const char* kVersion = "0.1.0";

std::string read_file(const std::filesystem::path& path);

// Writes via temp file + rename so readers never observe partial content.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// FNV-1a over the file bytes, hex-encoded; used to stamp inputs in run summaries.
std::string file_hash_hex(const std::filesystem::path& path);

std::string format_double(double v);
void log_warn(const std::string& msg);

}  // namespace ctscene
