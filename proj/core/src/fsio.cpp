#include "actmap/fsio.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "actmap/common.hpp"

namespace actmap {

void atomic_write_file(const std::filesystem::path& path,
                       const std::string& bytes) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) io_fail("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) io_fail("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    const std::string why = ec.message();
    fs::remove(tmp, ec);
    io_fail("cannot move " + tmp.string() + " into place: " + why);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in && !in.eof()) io_fail("error reading " + path.string());
  return std::move(buf).str();
}

}  // namespace actmap
