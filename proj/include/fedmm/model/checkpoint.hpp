#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedmm/model/adapter.hpp"
#include "fedmm/model/model.hpp"

namespace fedmm::model {

// Named dense tensor as stored in a checkpoint.
struct NamedTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t depth = 0;
  std::vector<double> values;  // row-major

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Container layout:
//   8 bytes   magic "FEDMMCK1"
//   u64 LE    byte length of the JSON index
//   JSON      {"kind": ..., "attrs": {...}, "tensors": [{"name","rows","cols","depth"}, ...]}
//   payload   IEEE-754 binary64, little endian, tensors in index order
// Round trips are bit-exact.
struct TensorFile {
  std::string kind;
  std::vector<std::pair<std::string, double>> attrs;
  std::vector<NamedTensor> tensors;

  double attr(const std::string& key) const;
};

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile load_tensor_file(const std::filesystem::path& path);
std::string encode_tensor_file(const TensorFile& file);
TensorFile decode_tensor_file(const std::string& bytes);

TensorFile adapter_to_tensors(const AdapterDelta& delta);
AdapterDelta adapter_from_tensors(const TensorFile& file);
TensorFile base_to_tensors(const BaseWeights& base);

void save_adapter(const std::filesystem::path& path, const AdapterDelta& delta);
AdapterDelta load_adapter(const std::filesystem::path& path);

}  // namespace fedmm::model
