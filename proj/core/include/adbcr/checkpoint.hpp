#pragma once

#include <filesystem>
#include <string>

#include "adbcr/model.hpp"

namespace adbcr {

// Selection metadata stored next to the parameters.
struct CheckpointMeta {
  std::string config_fingerprint;
  // Name of the selection criterion, e.g. "factual+distance" or "factual".
  std::string criterion;
  double criterion_value = 0.0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct NetworkCheckpoint {
  Model model;
  CheckpointMeta meta;
};

// Network payload (after the container header):
//   u64 input_dim, f64 dropout_p, u64 heads_per_arm, u64 discriminator_outputs
//   u64 n + u64[n] shared layer widths, u64 m + u64[m] head layer widths
//   str fingerprint, str criterion, f64 criterion value
//   f64s x mean, f64s x scale, f64 y mean, f64 y scale
//   u64 tensor count, then per tensor: str name, u64 rows, u64 cols, f64[rows*cols]
// Tensors are ordered phi, head(0,0), head(0,1), ..., head(1,*), discriminator.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const CheckpointMeta& meta);
NetworkCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adbcr
