#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sdcap/tensor.h"

namespace sdcap {

// Binary checkpoint container. All integers and floats are little-endian.
//
//   magic     8 bytes  "SDCAPCK1"
//   meta_len  u64      length of the metadata blob
//   meta      bytes    UTF-8 JSON (free-form, written by the caller)
//   count     u64      number of tensors
//   per tensor, in name order:
//     name_len u32, name bytes, rank u32, dims u64[rank],
//     values   f64[product(dims)]  (IEEE-754 binary64)
//
// Values round-trip bit-exactly.
struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::string metadata;
  std::vector<NamedTensor> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

// Appends every value of `store` under `prefix + name`.
void append_store(Checkpoint& ckpt, const ParamStore& store,
                  const std::string& prefix = "");
// Collects the tensors whose names start with `prefix` into a fresh store
// (prefix stripped). Grads are zero.
ParamStore extract_store(const Checkpoint& ckpt, const std::string& prefix = "");

}  // namespace sdcap
