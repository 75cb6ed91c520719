#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "abmkit/tensor.hpp"

namespace abmkit {

/// File error distinct from shape/numeric problems (missing manifest,
/// corrupt header, ...).
class CheckpointError : public TensorError {
 public:
  using TensorError::TensorError;
};

enum class Dtype { f64, f32 };

std::string dtype_name(Dtype dtype);
Dtype dtype_from_name(const std::string& name);

/// Writes one .abmt file per tensor into `dir` plus a manifest.json mapping
/// name -> {file, shape, dtype}. Each .abmt file carries magic "ABMT",
/// version u16, rank u16, dims as u64 little-endian and a little-endian
/// IEEE-754 payload (f64 in correctness mode, f32 in bench mode).
void save_checkpoint(const std::string& dir,
                     const std::vector<std::pair<std::string, Tensor>>& tensors,
                     Dtype dtype = Dtype::f64);

/// Loads every tensor declared by a manifest (path to manifest.json; tensor
/// files are resolved relative to it). f32 payloads widen to double.
std::map<std::string, Tensor> load_checkpoint(const std::string& manifest_path);

}  // namespace abmkit
