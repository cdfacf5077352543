#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace actmap::cli {

using Json = nlohmann::json;

// Anything the user can fix by editing the config file or the command
// line; main() maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void config_fail(const std::string& message) {
  throw ConfigError(message);
}

// Strict reader over one JSON object. Every getter claims its key; after
// the command has read everything it calls finish(), which rejects any
// key nobody claimed and spells out the accepted set.
class ConfigView {
 public:
  ConfigView(const Json& j, std::string scope);

  bool has(const std::string& key) const;

  int64_t req_int(const std::string& key);
  int64_t opt_int(const std::string& key, int64_t fallback);
  uint64_t opt_u64(const std::string& key, uint64_t fallback);
  double req_real(const std::string& key);
  double opt_real(const std::string& key, double fallback);
  bool opt_bool(const std::string& key, bool fallback);
  std::string req_str(const std::string& key);
  std::string opt_str(const std::string& key, std::string fallback);
  std::vector<double> req_reals(const std::string& key);
  std::optional<std::vector<double>> opt_reals(const std::string& key);
  std::vector<std::string> req_strs(const std::string& key);
  std::optional<std::vector<std::string>> opt_strs(const std::string& key);
  std::optional<std::vector<int64_t>> opt_ints(const std::string& key);

  // Claims the key; returns null when absent.
  const Json* req_array(const std::string& key);
  const Json* opt_array(const std::string& key);
  const Json* opt_object(const std::string& key);
  // A value that may be a class index or a class name.
  Json req_class_ref(const std::string& key);

  void finish() const;
  const std::string& scope() const { return scope_; }

 private:
  const Json& fetch(const std::string& key);
  const Json* try_fetch(const std::string& key);
  [[noreturn]] void type_fail(const std::string& key, const char* wanted);

  const Json* j_;
  std::string scope_;
  std::set<std::string> claimed_;
};

// Parses the file, demanding a single top-level object.
Json load_config_file(const std::filesystem::path& path);

// Values of the shared command-line flags; a set flag beats the matching
// config key.
struct FlagValues {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> scale;
  std::optional<int> threads;
};

struct CommonConfig {
  std::filesystem::path out;
  uint64_t seed = 0;
  int threads = 1;
};

// Claims "out", "seed" and "threads" on the view and applies flag
// overrides. The output directory is mandatory.
CommonConfig resolve_common(ConfigView& view, const FlagValues& flags);

// Accepts an optional "command" key so resolved configs can be fed back
// in; a mismatching value is rejected.
void check_command(ConfigView& view, const std::string& name);

// Serializes with sorted keys, two-space indent and a trailing newline,
// then writes atomically.
void write_json_file(const std::filesystem::path& path, const Json& j);

void write_text_file(const std::filesystem::path& path,
                     const std::string& text);

}  // namespace actmap::cli
