#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dhns/types.hpp"

namespace dhns {

// Checkpoint layout:
//
//   bytes 0..7    ASCII "DHNSCKPT"
//   bytes 8..15   header length N, little-endian uint64
//   next N bytes  UTF-8 JSON header
//   remainder     tensor data, little-endian float64, row-major
//
// Header: {"format": "dhns-checkpoint", "version": 1, "meta": {...},
//          "tensors": [{"name", "shape", "offset", "nbytes"}, ...]}
// Offsets are relative to the start of the data section.
struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> values;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  // Appends copies of the referenced tensors.
  void add(const std::vector<TensorRef>& refs);
  // Copies stored values into refs; names and shapes must match.
  void restore(const std::vector<TensorRef>& refs) const;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace dhns
