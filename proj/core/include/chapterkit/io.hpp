#pragma once

#include <filesystem>
#include <string>

namespace chapterkit {

std::string read_file(const std::filesystem::path& path);

// Current wall clock as ISO-8601 UTC ("2025-01-31T12:00:00Z").
std::string iso8601_utc_now();

// Write-temp-then-rename so readers never observe a partial file and
// re-runs replace outputs atomically.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace chapterkit
