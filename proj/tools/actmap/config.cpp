#include "config.hpp"

#include <fstream>
#include <sstream>

#include "actmap/fsio.hpp"

namespace actmap::cli {

ConfigView::ConfigView(const Json& j, std::string scope)
    : j_(&j), scope_(std::move(scope)) {
  if (!j.is_object()) {
    config_fail(scope_ + ": expected a JSON object");
  }
}

bool ConfigView::has(const std::string& key) const {
  return j_->contains(key);
}

const Json* ConfigView::try_fetch(const std::string& key) {
  claimed_.insert(key);
  auto it = j_->find(key);
  return it == j_->end() ? nullptr : &*it;
}

const Json& ConfigView::fetch(const std::string& key) {
  const Json* v = try_fetch(key);
  if (!v) config_fail(scope_ + ": missing required key \"" + key + "\"");
  return *v;
}

void ConfigView::type_fail(const std::string& key, const char* wanted) {
  config_fail(scope_ + ": \"" + key + "\" must be " + wanted + ", got " +
              (*j_)[key].dump());
}

int64_t ConfigView::req_int(const std::string& key) {
  const Json& v = fetch(key);
  if (!v.is_number_integer()) type_fail(key, "an integer");
  return v.get<int64_t>();
}

int64_t ConfigView::opt_int(const std::string& key, int64_t fallback) {
  const Json* v = try_fetch(key);
  if (!v) return fallback;
  if (!v->is_number_integer()) type_fail(key, "an integer");
  return v->get<int64_t>();
}

uint64_t ConfigView::opt_u64(const std::string& key, uint64_t fallback) {
  const Json* v = try_fetch(key);
  if (!v) return fallback;
  if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<int64_t>() < 0)) {
    type_fail(key, "a nonnegative integer");
  }
  return v->get<uint64_t>();
}

double ConfigView::req_real(const std::string& key) {
  const Json& v = fetch(key);
  if (!v.is_number()) type_fail(key, "a number");
  return v.get<double>();
}

double ConfigView::opt_real(const std::string& key, double fallback) {
  const Json* v = try_fetch(key);
  if (!v) return fallback;
  if (!v->is_number()) type_fail(key, "a number");
  return v->get<double>();
}

bool ConfigView::opt_bool(const std::string& key, bool fallback) {
  const Json* v = try_fetch(key);
  if (!v) return fallback;
  if (!v->is_boolean()) type_fail(key, "a boolean");
  return v->get<bool>();
}

std::string ConfigView::req_str(const std::string& key) {
  const Json& v = fetch(key);
  if (!v.is_string()) type_fail(key, "a string");
  return v.get<std::string>();
}

std::string ConfigView::opt_str(const std::string& key,
                                std::string fallback) {
  const Json* v = try_fetch(key);
  if (!v) return fallback;
  if (!v->is_string()) type_fail(key, "a string");
  return v->get<std::string>();
}

std::vector<double> ConfigView::req_reals(const std::string& key) {
  const Json& v = fetch(key);
  if (!v.is_array()) type_fail(key, "an array of numbers");
  std::vector<double> out;
  for (const Json& e : v) {
    if (!e.is_number()) type_fail(key, "an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::optional<std::vector<double>> ConfigView::opt_reals(
    const std::string& key) {
  if (!try_fetch(key)) return std::nullopt;
  claimed_.erase(key);
  return req_reals(key);
}

std::vector<std::string> ConfigView::req_strs(const std::string& key) {
  const Json& v = fetch(key);
  if (!v.is_array()) type_fail(key, "an array of strings");
  std::vector<std::string> out;
  for (const Json& e : v) {
    if (!e.is_string()) type_fail(key, "an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::optional<std::vector<std::string>> ConfigView::opt_strs(
    const std::string& key) {
  if (!try_fetch(key)) return std::nullopt;
  claimed_.erase(key);
  return req_strs(key);
}

std::optional<std::vector<int64_t>> ConfigView::opt_ints(
    const std::string& key) {
  const Json* v = try_fetch(key);
  if (!v) return std::nullopt;
  if (!v->is_array()) type_fail(key, "an array of integers");
  std::vector<int64_t> out;
  for (const Json& e : *v) {
    if (!e.is_number_integer()) type_fail(key, "an array of integers");
    out.push_back(e.get<int64_t>());
  }
  return out;
}

const Json* ConfigView::req_array(const std::string& key) {
  const Json& v = fetch(key);
  if (!v.is_array()) type_fail(key, "an array");
  return &v;
}

const Json* ConfigView::opt_array(const std::string& key) {
  const Json* v = try_fetch(key);
  if (!v) return nullptr;
  if (!v->is_array()) type_fail(key, "an array");
  return v;
}

const Json* ConfigView::opt_object(const std::string& key) {
  const Json* v = try_fetch(key);
  if (!v) return nullptr;
  if (!v->is_object()) type_fail(key, "an object");
  return v;
}

Json ConfigView::req_class_ref(const std::string& key) {
  const Json& v = fetch(key);
  if (!v.is_string() && !v.is_number_integer()) {
    type_fail(key, "a class name or index");
  }
  return v;
}

void ConfigView::finish() const {
  std::vector<std::string> unknown;
  for (auto it = j_->begin(); it != j_->end(); ++it) {
    if (!claimed_.count(it.key())) unknown.push_back(it.key());
  }
  if (unknown.empty()) return;
  std::ostringstream msg;
  msg << scope_ << ": unknown key";
  if (unknown.size() > 1) msg << 's';
  for (size_t i = 0; i < unknown.size(); ++i) {
    msg << (i ? ", " : " ") << '"' << unknown[i] << '"';
  }
  msg << "; accepted keys:";
  for (const std::string& k : claimed_) msg << " \"" << k << '"';
  config_fail(msg.str());
}

Json load_config_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    config_fail(std::string("cannot read config: ") + e.what());
  }
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    config_fail("config " + path.string() + " is not valid JSON");
  }
  if (!j.is_object()) {
    config_fail("config " + path.string() +
                " must hold a single JSON object");
  }
  return j;
}

CommonConfig resolve_common(ConfigView& view, const FlagValues& flags) {
  CommonConfig c;
  std::string out = view.opt_str("out", "");
  if (flags.out) out = *flags.out;
  if (out.empty()) {
    config_fail(view.scope() +
                ": output directory required (\"out\" key or --out)");
  }
  c.out = out;
  c.seed = flags.seed ? *flags.seed : view.opt_u64("seed", 0);
  int64_t threads =
      flags.threads ? *flags.threads : view.opt_int("threads", 1);
  if (threads < 1) {
    config_fail(view.scope() + ": \"threads\" must be >= 1, got " +
                std::to_string(threads));
  }
  c.threads = static_cast<int>(threads);
  return c;
}

void check_command(ConfigView& view, const std::string& name) {
  const std::string cmd = view.opt_str("command", name);
  if (cmd != name) {
    config_fail(view.scope() + ": config is for command \"" + cmd +
                "\", not \"" + name + "\"");
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  atomic_write_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  atomic_write_file(path, text);
}

}  // namespace actmap::cli
