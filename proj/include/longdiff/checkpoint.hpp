#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "longdiff/tensor.hpp"
#include "longdiff/unet.hpp"

namespace longdiff {

// Everything needed to rebuild a sampler from a file: the network config,
// the schedule it was trained against, and the optimizer position.
struct CheckpointMeta {
    UNetConfig config;
    int schedule_steps = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::int64_t iteration = 0;
};

// Named-tensor container, magic "LDCK", version u16, little-endian f64
// payloads. Layout per tensor: name (u16 length + bytes), rank u8, dims
// u32 x rank, data f64 x numel. A JSON metadata block follows the header.
struct Checkpoint {
    CheckpointMeta meta;
    std::vector<std::string> names;        // serialization order
    std::map<std::string, Tensor> tensors;

    void add(const std::string& name, const Tensor& t);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;
};

inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace longdiff
