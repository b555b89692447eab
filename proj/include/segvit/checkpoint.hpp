#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segvit/params.hpp"
#include "segvit/tensor.hpp"

namespace segvit {

inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'G', 'V', 'I', 'T', 'C', 'K'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const TensorRecord&) const = default;
};

// File layout (little-endian):
//   magic[8] u32 version
//   u64 config_len, config bytes
//   i64 iteration, i64 optimizer_step
//   u64 n_params, records; u64 n_moments, records
// record: u32 name_len, name, u32 dtype_bytes (4), u32 rank, i64 dims[rank],
//         raw values
struct Checkpoint {
  uint32_t version = kCheckpointVersion;
  std::string config;  // full serialized SegVitConfig
  int64_t iteration = 0;
  int64_t optimizer_step = 0;
  std::vector<TensorRecord> params;
  std::vector<TensorRecord> moments;  // "m.<param>" then "v.<param>" per parameter

  bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::vector<TensorRecord> capture(const ParameterStore<float>& store);
// Copies values into the store; names, order and shapes must match exactly.
void restore(const std::vector<TensorRecord>& records, ParameterStore<float>& store);

}  // namespace segvit
