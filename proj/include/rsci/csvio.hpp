#pragma once

#include <filesystem>
#include <string>

namespace rsci {

/// Shortest text form that round-trips a double exactly (17 significant digits).
std::string fmt17(double x);

/// Writes content to dir/name via a temp file + rename, so a failed run never
/// leaves a partial artifact.
void atomic_write_file(const std::filesystem::path& dir, const std::string& name,
                       const std::string& content);

/// FNV-1a 64-bit over the bytes; stable across platforms.
std::string fnv1a_hex(const std::string& bytes);

} // namespace rsci
