#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "actmap/tensor.hpp"

namespace actmap {

// One stored video clip: frames as [3F, H, W] in [0,1], optional
// ground-truth flow as [2(F-1), H, W], optional class label, optional
// geo/time attributes for detection pipelines.
struct Clip {
  std::string id;
  Tensor frames;
  Tensor flow;  // undefined when no ground truth exists
  int label = -1;
  std::optional<double> fps;
  std::optional<double> lat;
  std::optional<double> lon;
  std::optional<std::string> ts;  // RFC 3339 UTC

  int frame_count() const { return frames.dim(0) / 3; }
  int height() const { return frames.dim(1); }
  int width() const { return frames.dim(2); }
};

// Files on disk: <dir>/<id>.clip in the actensor container (entries
// "frames" and optionally "flow") plus an index.jsonl with one line per
// clip: {"id","file","label",...}.
void save_clip_file(const std::filesystem::path& path, const Clip& clip);
Clip load_clip_file(const std::filesystem::path& path);

struct ClipDataset {
  std::filesystem::path dir;
  std::vector<Clip> index;  // frames/flow undefined until load_clip()

  // Materializes the tensors for entry i.
  Clip load_clip(size_t i) const;
};

// Writes the clips plus index.jsonl into dir (created if needed).
void save_dataset(const std::filesystem::path& dir,
                  const std::vector<Clip>& clips);
// Reads index.jsonl only; tensors load lazily via load_clip().
ClipDataset open_dataset(const std::filesystem::path& dir);

}  // namespace actmap
