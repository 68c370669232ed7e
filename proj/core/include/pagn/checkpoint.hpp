#pragma once

#include <filesystem>

#include "pagn/adam.hpp"
#include "pagn/nn.hpp"

namespace pagn {

struct CheckpointNetwork {
  std::string name;  // "G", "D", "phi_age", "phi_id"
  NetworkSpec spec;
  ParameterSet params;
};

struct AdamSnapshot {
  std::string network;
  AdamState state;
};

/// Binary container: magic "PAGN0001", little-endian 32-bit float arrays with
/// rank+dims headers, a config snapshot, optimizer states and the RNG stream.
/// load(save(x)) is bitwise faithful, so resumed training continues exactly.
struct Checkpoint {
  std::uint32_t version = 1;
  std::string config_json = "{}";
  std::uint64_t iteration = 0;
  std::string rng_state;
  std::vector<CheckpointNetwork> networks;
  std::vector<AdamSnapshot> adam;

  CheckpointNetwork* find(const std::string& name);
  const CheckpointNetwork* find(const std::string& name) const;
  const AdamSnapshot* find_adam(const std::string& network) const;
};

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pagn
