#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "actmap/checkpoint.hpp"
#include "actmap/fsio.hpp"
#include "actmap/tensor.hpp"

using namespace actmap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("actmap_ckpt_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("save/load restores names, shapes and float32 values") {
  TempDir dir;
  Rng rng(5);
  Tensor a = Tensor::randn({2, 3}, rng);
  Tensor b = Tensor::randn({4}, rng, 10.0);
  const fs::path file = dir.path / "pack.at";
  save_tensors(file, {{"enc.w", a}, {"enc.b", b}});

  auto loaded = load_tensors(file);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].first == "enc.w");
  CHECK(loaded[0].second.shape() == std::vector<int>{2, 3});
  CHECK(loaded[1].first == "enc.b");
  for (int64_t i = 0; i < a.numel(); ++i) {
    CHECK(loaded[0].second.data()[i] ==
          static_cast<double>(static_cast<float>(a.data()[i])));
  }
}

TEST_CASE("save/load/save reproduces the file byte for byte") {
  TempDir dir;
  Rng rng(99);
  const fs::path f1 = dir.path / "one.at";
  const fs::path f2 = dir.path / "two.at";
  save_tensors(f1, {{"w", Tensor::randn({3, 5, 2}, rng)},
                    {"b", Tensor::randn({7}, rng)}});
  save_tensors(f2, load_tensors(f1));
  CHECK(read_file(f1) == read_file(f2));
}

TEST_CASE("malformed containers are rejected with a reason") {
  TempDir dir;
  const fs::path file = dir.path / "bad.at";

  CHECK_THROWS_AS(load_tensors(dir.path / "missing.at"), std::runtime_error);

  atomic_write_file(file, "not a container\n");
  CHECK_THROWS_AS(load_tensors(file), std::runtime_error);

  atomic_write_file(file, "actensor v1\ncount 1\nw 1 4\npayload\nxx");
  CHECK_THROWS_AS(load_tensors(file), std::runtime_error);

  atomic_write_file(file, "actensor v1\ncount 1\nw 1 -4\npayload\n");
  CHECK_THROWS_AS(load_tensors(file), std::runtime_error);

  atomic_write_file(file, "actensor v1\ncount 2\nw 1 1\nw 1 1\npayload\n" +
                              std::string(8, '\0'));
  CHECK_THROWS_AS(load_tensors(file), std::runtime_error);
}

TEST_CASE("tensor names with whitespace are rejected at save time") {
  TempDir dir;
  CHECK_THROWS_AS(
      save_tensors(dir.path / "x.at", {{"bad name", Tensor::zeros({1})}}),
      std::invalid_argument);
  CHECK_THROWS_AS(save_tensors(dir.path / "x.at", {{"", Tensor::zeros({1})}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(save_tensors(dir.path / "x.at",
                               {{"w", Tensor::zeros({1})},
                                {"w", Tensor::zeros({1})}}),
                  std::invalid_argument);
}

TEST_CASE("parameter round trip checks names and shapes") {
  TempDir dir;
  Rng rng(1);
  ParamList params;
  params.push_back({"layer1.w", Tensor::randn({4, 4}, rng)});
  params.push_back({"layer1.b", Tensor::randn({4}, rng)});
  const fs::path file = dir.path / "params.at";
  save_params(file, params);

  ParamList fresh;
  fresh.push_back({"layer1.w", Tensor::zeros({4, 4})});
  fresh.push_back({"layer1.b", Tensor::zeros({4})});
  load_params(file, fresh);
  for (int64_t i = 0; i < 16; ++i) {
    CHECK(fresh[0].value.data()[i] ==
          static_cast<double>(static_cast<float>(params[0].value.data()[i])));
  }

  ParamList wrong_shape;
  wrong_shape.push_back({"layer1.w", Tensor::zeros({4, 5})});
  wrong_shape.push_back({"layer1.b", Tensor::zeros({4})});
  CHECK_THROWS_AS(load_params(file, wrong_shape), std::runtime_error);

  ParamList missing;
  missing.push_back({"layer1.w", Tensor::zeros({4, 4})});
  missing.push_back({"layer2.b", Tensor::zeros({4})});
  CHECK_THROWS_AS(load_params(file, missing), std::runtime_error);

  ParamList subset;
  subset.push_back({"layer1.w", Tensor::zeros({4, 4})});
  CHECK_THROWS_AS(load_params(file, subset), std::runtime_error);
}
