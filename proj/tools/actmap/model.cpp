#include "model.hpp"

#include <cctype>
#include <filesystem>

#include "actmap/checkpoint.hpp"
#include "actmap/common.hpp"
#include "config.hpp"

namespace actmap::cli {

namespace fs = std::filesystem;

void save_model(const fs::path& dir, const TwoStream& net,
                const std::vector<std::string>& class_names) {
  fs::create_directories(dir);
  const StreamConfig& sc = net.cfg;
  Json j;
  j["width_scale"] = sc.width_scale;
  j["input_resolution"] = sc.input_resolution;
  j["frame_count"] = sc.frame_count;
  j["class_count"] = sc.class_count;
  j["fusion_spatial"] = sc.fusion_spatial;
  j["fusion_temporal"] = sc.fusion_temporal;
  j["dropout"] = sc.dropout;
  j["flow_cap"] = sc.flow_cap;
  j["motion_width_scale"] = net.motion.config().width_scale;
  j["classes"] = class_names;
  write_json_file(dir / "streams.json", j);
  save_params(dir / "spatial.ckpt", net.spatial.params());
  save_params(dir / "temporal.ckpt", net.temporal.params());
  save_params(dir / "motion.ckpt", net.motion.params());
}

ModelBundle load_model(const fs::path& dir) {
  const fs::path meta = dir / "streams.json";
  if (!fs::exists(meta)) {
    config_fail("model: " + meta.string() + " does not exist");
  }
  Json j = load_config_file(meta);
  ConfigView v(j, "streams.json");

  StreamConfig sc;
  sc.width_scale = v.req_real("width_scale");
  sc.input_resolution = static_cast<int>(v.req_int("input_resolution"));
  sc.frame_count = static_cast<int>(v.req_int("frame_count"));
  sc.class_count = static_cast<int>(v.req_int("class_count"));
  sc.fusion_spatial = v.req_real("fusion_spatial");
  sc.fusion_temporal = v.req_real("fusion_temporal");
  sc.dropout = v.req_real("dropout");
  sc.flow_cap = v.req_real("flow_cap");

  MotionNetConfig mc;
  mc.width_scale = v.req_real("motion_width_scale");
  mc.frame_count = sc.frame_count;
  mc.height = sc.input_resolution;
  mc.width = sc.input_resolution;

  std::vector<std::string> names = v.req_strs("classes");
  v.finish();
  if (static_cast<int>(names.size()) != sc.class_count) {
    config_fail("streams.json: " + std::to_string(names.size()) +
                " class names for class_count " +
                std::to_string(sc.class_count));
  }

  try {
    validate(sc);
    validate(mc);
  } catch (const std::invalid_argument& e) {
    config_fail(std::string("streams.json: ") + e.what());
  }

  Rng rng(0);  // weights come from the checkpoints
  ModelBundle bundle{sc, mc, std::move(names),
                     build_two_stream(sc, mc, rng)};
  load_params(dir / "spatial.ckpt", bundle.net.spatial.params());
  load_params(dir / "temporal.ckpt", bundle.net.temporal.params());
  load_params(dir / "motion.ckpt", bundle.net.motion.params());
  return bundle;
}

void write_classes_file(const fs::path& path,
                        const std::vector<std::string>& names) {
  Json j;
  j["classes"] = names;
  write_json_file(path, j);
}

std::vector<std::string> read_classes_file(const fs::path& path) {
  if (!fs::exists(path)) return {};
  Json j = load_config_file(path);
  ConfigView v(j, path.filename().string());
  std::vector<std::string> names = v.req_strs("classes");
  v.finish();
  return names;
}

std::vector<std::string> default_class_names(int count) {
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    names.push_back("class" + std::to_string(i));
  }
  return names;
}

std::string file_safe(const std::string& name) {
  std::string out;
  bool gap = false;
  for (char ch : name) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      if (gap && !out.empty()) out.push_back('_');
      out.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(ch))));
      gap = false;
    } else {
      gap = true;
    }
  }
  return out.empty() ? "class" : out;
}

}  // namespace actmap::cli
