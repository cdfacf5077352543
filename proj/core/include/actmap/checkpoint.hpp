#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "actmap/optim.hpp"
#include "actmap/tensor.hpp"

namespace actmap {

// Tensor container, format "actensor v1":
//
//   actensor v1\n
//   count <N>\n
//   <name> <ndim> <d0> <d1> ...\n     (N header lines)
//   payload\n
//   <raw little-endian float32 values, one block per entry, header order>
//
// Names must be non-empty and contain no whitespace. Values are stored as
// 32-bit floats; a save/load/save cycle reproduces the file byte for byte.
void save_tensors(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, Tensor>>& entries);

std::vector<std::pair<std::string, Tensor>> load_tensors(
    const std::filesystem::path& path);

// Same container, addressed by parameter name. Loading requires an exact
// name/shape match with the given parameter list.
void save_params(const std::filesystem::path& path, const ParamList& params);
void load_params(const std::filesystem::path& path, ParamList& params);

}  // namespace actmap
