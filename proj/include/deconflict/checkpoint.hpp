#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "deconflict/nn.hpp"
#include "deconflict/scenario.hpp"

namespace deconflict {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trained parameters of one fleet.
///
/// Binary layout, all integers little-endian:
///   char[8]  "DCFLCKPT"
///   u32      format version
///   u8       fleet ('A' or 'B')
///   u64      training seed
///   u64      episodes trained
///   u32 x4   network dims (obs, enc, trunk, actions)
///   u32      tensor count
///   per tensor: u32 rank, u32 dims[rank]
///   u64      payload length in bytes
///   f32[]    parameters in declared tensor order
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  FleetId fleet = FleetId::kA;
  uint64_t seed = 0;
  uint64_t episodes = 0;
  nn::PolicyNetwork<float> net;
};

std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// Throws CheckpointError on a missing file, bad magic, unsupported version,
/// shape mismatch or a payload of the wrong length.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace deconflict
