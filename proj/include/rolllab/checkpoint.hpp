#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rolllab/tensor.hpp"

namespace rolllab::grad {

// Flat binary parameter blob:
//   magic "RLLW", version u32, config string (u32 length + UTF-8), count u32,
//   then per tensor: name (u32 length + UTF-8), rank u32, extents u32 each,
//   payload as little-endian f64.
// `config` is an opaque string (the model echoes its JSON config here).
struct Checkpoint {
    std::string config;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rolllab::grad
