#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "actmap/dataset.hpp"
#include "actmap/georecords.hpp"

#include "config.hpp"

namespace actmap::cli {

// Every clip of a dataset directory, tensors materialized.
std::vector<Clip> load_clips(const std::filesystem::path& dir);

// Class names from an inline "classes" array or a "classes_file" path;
// setting both is rejected. Empty when neither key is present.
std::vector<std::string> names_from_config(ConfigView& view);

// Falls back to the score width of the first record (as "class<i>")
// when the config named no classes.
std::vector<std::string> names_for_records(
    std::vector<std::string> configured,
    const std::vector<DetectionRecord>& records);

// Maps a class reference (index, or name looked up in `names`) to an id.
int resolve_class(const Json& ref, const std::vector<std::string>& names,
                  const std::string& scope);

// Shortest round-trippable decimal form, for CSV cells.
std::string format_real(double v);

}  // namespace actmap::cli
