#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mbridge/numcore/adam.hpp"
#include "mbridge/numcore/parameter.hpp"
#include "mbridge/numcore/tensor.hpp"

namespace mbridge::pipeline {

inline constexpr int kCheckpointFormatVersion = 1;

/// Model state plus enough training state to resume.
///
/// On disk: the 8-byte magic "MBRCKPT\0", a little-endian u64 header length,
/// a JSON header, then a payload of little-endian f64 values. The header
/// locates every tensor, Adam moment and trace row by offset into the payload.
struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  std::string kind;         // "autoencoder" or "captioner"
  std::string config_json;  // compact RunConfig snapshot
  std::vector<std::string> vocabulary;
  std::vector<std::pair<std::string, Tensor>> tensors;
  double adam_lr = 0.0;
  std::map<std::string, AdamState> adam;
  std::string rng_state;
  std::size_t epoch = 0;
  std::vector<std::string> trace_columns;
  std::vector<std::vector<double>> trace;

  friend bool operator==(const Checkpoint&, const Checkpoint&);
};

std::string serialize(const Checkpoint& checkpoint);
/// Throws IoError on a bad magic, truncation or format_version mismatch.
Checkpoint deserialize(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws InputError when the file is missing and IoError when it is corrupt.
Checkpoint load_checkpoint(const std::filesystem::path& path);

void store_parameters(Checkpoint& checkpoint, const ParameterList& params);
/// Copies stored values into `params`. Throws InputError for a missing name
/// and DimensionError for a shape mismatch.
void restore_parameters(const Checkpoint& checkpoint, const ParameterList& params);

void store_optimizer(Checkpoint& checkpoint, const Adam& adam);
void restore_optimizer(const Checkpoint& checkpoint, Adam& adam);

}  // namespace mbridge::pipeline
