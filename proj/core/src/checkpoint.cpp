#include "actmap/checkpoint.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "actmap/common.hpp"
#include "actmap/fsio.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as little-endian host floats");

namespace actmap {
namespace {

constexpr char kMagic[] = "actensor v1";
constexpr int kMaxRank = 8;

bool valid_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace

void save_tensors(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, Tensor>>& entries) {
  std::ostringstream out;
  out << kMagic << "\n";
  out << "count " << entries.size() << "\n";
  std::unordered_set<std::string> seen;
  for (const auto& [name, t] : entries) {
    if (!valid_name(name)) {
      fail("checkpoint: invalid tensor name '" + name + "'");
    }
    if (!seen.insert(name).second) {
      fail("checkpoint: duplicate tensor name '" + name + "'");
    }
    require(t.defined(), "checkpoint: undefined tensor '" + name + "'");
    out << name << " " << t.ndim();
    for (int d : t.shape()) out << " " << d;
    out << "\n";
  }
  out << "payload\n";
  for (const auto& [name, t] : entries) {
    for (double v : t.data()) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
  atomic_write_file(path, std::move(out).str());
}

std::vector<std::pair<std::string, Tensor>> load_tensors(
    const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  std::string line;

  if (!std::getline(in, line) || line != kMagic) {
    io_fail(path.string() + ": not an actensor v1 file");
  }
  if (!std::getline(in, line) || line.rfind("count ", 0) != 0) {
    io_fail(path.string() + ": missing count line");
  }
  int64_t count = -1;
  try {
    count = std::stoll(line.substr(6));
  } catch (const std::exception&) {
    io_fail(path.string() + ": malformed count line");
  }
  if (count < 0) io_fail(path.string() + ": negative entry count");

  std::vector<std::pair<std::string, std::vector<int>>> headers;
  std::unordered_set<std::string> seen;
  int64_t total = 0;
  for (int64_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      io_fail(path.string() + ": header truncated at entry " +
              std::to_string(i));
    }
    std::istringstream hs(line);
    std::string name;
    int ndim = -1;
    if (!(hs >> name >> ndim) || ndim < 0 || ndim > kMaxRank) {
      io_fail(path.string() + ": malformed header line '" + line + "'");
    }
    std::vector<int> shape(ndim);
    for (int d = 0; d < ndim; ++d) {
      if (!(hs >> shape[d]) || shape[d] <= 0) {
        io_fail(path.string() + ": bad dimension in header line '" + line +
                "'");
      }
    }
    std::string extra;
    if (hs >> extra) {
      io_fail(path.string() + ": trailing tokens in header line '" + line +
              "'");
    }
    if (!seen.insert(name).second) {
      io_fail(path.string() + ": duplicate tensor name '" + name + "'");
    }
    total += shape_numel(shape);
    headers.emplace_back(std::move(name), std::move(shape));
  }
  if (!std::getline(in, line) || line != "payload") {
    io_fail(path.string() + ": missing payload marker");
  }

  const size_t offset = static_cast<size_t>(in.tellg());
  const size_t need = static_cast<size_t>(total) * sizeof(float);
  if (bytes.size() - offset != need) {
    io_fail(path.string() + ": payload holds " +
            std::to_string(bytes.size() - offset) + " bytes, header needs " +
            std::to_string(need));
  }

  std::vector<std::pair<std::string, Tensor>> entries;
  entries.reserve(headers.size());
  const char* cursor = bytes.data() + offset;
  for (auto& [name, shape] : headers) {
    const int64_t n = shape_numel(shape);
    std::vector<double> data(n);
    for (int64_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, cursor, sizeof(f));
      cursor += sizeof(f);
      data[i] = static_cast<double>(f);
    }
    entries.emplace_back(std::move(name),
                         Tensor::from_data(std::move(shape), std::move(data)));
  }
  return entries;
}

void save_params(const std::filesystem::path& path, const ParamList& params) {
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.reserve(params.size());
  for (const Parameter& p : params) entries.emplace_back(p.name, p.value);
  save_tensors(path, entries);
}

void load_params(const std::filesystem::path& path, ParamList& params) {
  auto entries = load_tensors(path);
  std::unordered_map<std::string, Tensor> by_name;
  for (auto& [name, t] : entries) by_name.emplace(std::move(name), t);
  for (Parameter& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      io_fail(path.string() + ": missing parameter '" + p.name + "'");
    }
    if (it->second.shape() != p.value.shape()) {
      io_fail(path.string() + ": parameter '" + p.name + "' has shape " +
              it->second.shape_str() + ", expected " + p.value.shape_str());
    }
    std::span<const double> src = it->second.data();
    std::copy(src.begin(), src.end(), p.value.data().begin());
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    io_fail(path.string() + ": unknown parameter '" +
            by_name.begin()->first + "'");
  }
}

}  // namespace actmap
