#pragma once

#include <filesystem>
#include <string>

namespace actmap {

// Writes via a sibling temp file and rename, so readers never observe a
// partially written file.
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace actmap
