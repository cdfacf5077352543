#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "actmap/streams.hpp"

namespace actmap::cli {

// A trained two-stream classifier on disk: streams.json describing the
// geometry plus one checkpoint per network.
//
//   <dir>/streams.json
//   <dir>/spatial.ckpt
//   <dir>/temporal.ckpt
//   <dir>/motion.ckpt
struct ModelBundle {
  StreamConfig stream_cfg;
  MotionNetConfig motion_cfg;
  std::vector<std::string> class_names;  // size class_count
  TwoStream net;
};

void save_model(const std::filesystem::path& dir, const TwoStream& net,
                const std::vector<std::string>& class_names);

ModelBundle load_model(const std::filesystem::path& dir);

// classes.json: {"classes": ["name", ...]}. Loading a missing file yields
// an empty list.
void write_classes_file(const std::filesystem::path& path,
                        const std::vector<std::string>& names);
std::vector<std::string> read_classes_file(const std::filesystem::path& path);

// "class3" .. fills gaps when no names are known.
std::vector<std::string> default_class_names(int count);

// Lowercased name with every non-alphanumeric run collapsed to '_', for
// per-class artifact filenames.
std::string file_safe(const std::string& name);

}  // namespace actmap::cli
