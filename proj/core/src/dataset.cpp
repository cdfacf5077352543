#include "actmap/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "actmap/checkpoint.hpp"
#include "actmap/fsio.hpp"

namespace actmap {

namespace {

void check_clip_tensors(const Clip& clip) {
  if (!clip.frames.defined() || clip.frames.ndim() != 3)
    throw std::invalid_argument("clip frames must be a [3F,H,W] tensor");
  if (clip.frames.dim(0) % 3 != 0 || clip.frames.dim(0) < 6)
    throw std::invalid_argument("clip needs at least two RGB frames, got " +
                                clip.frames.shape_str());
  if (clip.flow.defined()) {
    const int pairs = clip.frames.dim(0) / 3 - 1;
    if (clip.flow.ndim() != 3 || clip.flow.dim(0) != 2 * pairs ||
        clip.flow.dim(1) != clip.frames.dim(1) ||
        clip.flow.dim(2) != clip.frames.dim(2))
      throw std::invalid_argument("clip flow " + clip.flow.shape_str() +
                                  " does not match frames " +
                                  clip.frames.shape_str());
  }
}

}  // namespace

void save_clip_file(const std::filesystem::path& path, const Clip& clip) {
  check_clip_tensors(clip);
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.emplace_back("frames", clip.frames);
  if (clip.flow.defined()) entries.emplace_back("flow", clip.flow);
  save_tensors(path, entries);
}

Clip load_clip_file(const std::filesystem::path& path) {
  Clip clip;
  clip.id = path.stem().string();
  for (auto& [name, tensor] : load_tensors(path)) {
    if (name == "frames")
      clip.frames = tensor;
    else if (name == "flow")
      clip.flow = tensor;
    else
      throw std::runtime_error("unexpected entry '" + name + "' in clip file " +
                               path.string());
  }
  if (!clip.frames.defined())
    throw std::runtime_error("clip file has no frames: " + path.string());
  check_clip_tensors(clip);
  return clip;
}

Clip ClipDataset::load_clip(size_t i) const {
  const Clip& meta = index.at(i);
  Clip clip = load_clip_file(dir / (meta.id + ".clip"));
  clip.id = meta.id;
  clip.label = meta.label;
  clip.fps = meta.fps;
  clip.lat = meta.lat;
  clip.lon = meta.lon;
  clip.ts = meta.ts;
  return clip;
}

void save_dataset(const std::filesystem::path& dir,
                  const std::vector<Clip>& clips) {
  std::filesystem::create_directories(dir);
  std::ostringstream index;
  for (const Clip& clip : clips) {
    if (clip.id.empty())
      throw std::invalid_argument("clip id must not be empty");
    save_clip_file(dir / (clip.id + ".clip"), clip);
    nlohmann::json line;
    line["id"] = clip.id;
    line["file"] = clip.id + ".clip";
    if (clip.label >= 0) line["label"] = clip.label;
    if (clip.fps) line["fps"] = *clip.fps;
    if (clip.lat) line["lat"] = *clip.lat;
    if (clip.lon) line["lon"] = *clip.lon;
    if (clip.ts) line["ts"] = *clip.ts;
    index << line.dump() << '\n';
  }
  atomic_write_file(dir / "index.jsonl", index.str());
}

ClipDataset open_dataset(const std::filesystem::path& dir) {
  ClipDataset ds;
  ds.dir = dir;
  std::istringstream in(read_file(dir / "index.jsonl"));
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("bad index line " + std::to_string(lineno) +
                               " in " + dir.string() + ": " + e.what());
    }
    Clip meta;
    meta.id = j.at("id").get<std::string>();
    if (j.contains("label")) meta.label = j["label"].get<int>();
    if (j.contains("fps")) meta.fps = j["fps"].get<double>();
    if (j.contains("lat")) meta.lat = j["lat"].get<double>();
    if (j.contains("lon")) meta.lon = j["lon"].get<double>();
    if (j.contains("ts")) meta.ts = j["ts"].get<std::string>();
    ds.index.push_back(std::move(meta));
  }
  return ds;
}

}  // namespace actmap
