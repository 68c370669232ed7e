#pragma once

#include <filesystem>

#include "pagn/critics.hpp"
#include "pagn/nn.hpp"

namespace pagn {

/// Flat run configuration covering scale, dataset, schedule and loss knobs.
/// Every field has a documented default; unknown JSON keys are rejected.
struct RunConfig {
  ScaleConfig scale;

  std::uint64_t master_seed = 1;  // dataset generation
  std::uint64_t seed = 1;         // weight init + batch sampling
  int identities_per_split = 64;
  int samples_per_cluster = 64;

  int target_cluster = 1;  // 1..3
  LossWeights weights;     // lambda_a 300.0, lambda_p 0.10, lambda_i 0.005
  double lr0 = 1e-4;
  long long lr_decay_interval = 2000;
  double lr_decay_factor = 0.5;
  int batch_size = 8;
  long long total_iterations = 2000;
  int pixel_period = 5;
  double weight_decay = 0.0;          // optional L2 reading of the decay schedule
  std::string discriminator = "pyramid";  // or "one_pathway"

  long long pretrain_age_iterations = 2000;
  long long pretrain_id_iterations = 2000;
  double triplet_margin = 0.2;

  void validate() const;
};

RunConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const RunConfig& cfg);  // stable key order, pretty

RunConfig load_config_file(const std::filesystem::path& path);
/// Writes the resolved configuration into `dir`/config.json.
void echo_config(const RunConfig& cfg, const std::filesystem::path& dir);

}  // namespace pagn
