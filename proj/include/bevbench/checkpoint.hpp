#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bevbench/optim.hpp"
#include "bevbench/tensor.hpp"

namespace bevbench {

// Checkpoint layout (all integers little-endian uint32):
//   magic "VPNCKPT1"
//   meta_len, meta bytes (UTF-8 JSON; "{}" when there is none)
//   then for each parameter, sorted by name:
//     name_len, name bytes, rank, dims[rank], values as little-endian f64
// Round-trips bit-exactly.

struct Checkpoint {
  std::string meta_json;
  std::vector<std::pair<std::string, Tensor>> params;  // sorted by name
};

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const std::string& meta_json = "{}");
Checkpoint load_checkpoint(const std::string& path);

// Copies loaded values into an existing ParamSet; names and shapes must match
// exactly or ConfigError is thrown.
void restore_params(ParamSet& params, const Checkpoint& ckpt);

}  // namespace bevbench
