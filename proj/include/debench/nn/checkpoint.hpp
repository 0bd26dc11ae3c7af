#ifndef DEBENCH_NN_CHECKPOINT_HPP_
#define DEBENCH_NN_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "debench/nn/policy.hpp"

namespace debench::nn {

// Binary container: magic "DBENCHCK", u32 version, u64 FNV-1a hash of the
// config string, the config string itself, then a named tensor table with
// f32 little-endian payloads (column-major). Loading verifies magic, version
// and that the stored hash matches the stored config, so truncated or mixed
// files fail loudly instead of producing a silently wrong network.
struct Checkpoint {
  std::string config;       // opaque to the container; hashed on save
  ParamMap<float> tensors;
};

constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t fnv1a64(std::string_view s);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace debench::nn

#endif  // DEBENCH_NN_CHECKPOINT_HPP_
