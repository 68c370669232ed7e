#pragma once

#include <iosfwd>
#include <optional>

#include "pagn/checkpoint.hpp"
#include "pagn/config.hpp"
#include "pagn/dataset.hpp"

namespace pagn {

struct MetricsRow {
  long long iteration = 0;
  double lr = 0;
  double gan_d = 0;
  double gan_g = 0;
  std::optional<double> pixel;  // blank on non-pixel iterations
  double identity = 0;
  double g_total = 0;
  double wall_ms = 0;
};

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);

/// One training session for cfg.target_cluster. Alternates one critic update
/// and one generator update per iteration; the pixel term joins the generator
/// objective every cfg.pixel_period iterations. Returns the final checkpoint
/// (networks G and D, both optimizer states, RNG stream, iteration counter).
///
/// `resume` continues a saved session bitwise; `stop_after` (>=0) ends the
/// loop early at that iteration so the caller can checkpoint mid-run. On a
/// non-finite loss a diagnostic checkpoint is written into `diagnostic_dir`
/// before the error is thrown.
Checkpoint train_session(const RunConfig& cfg, const DatasetPartition& part,
                         const CheckpointNetwork& phi_age, const CheckpointNetwork& phi_id,
                         std::ostream* metrics, std::ostream* progress,
                         const Checkpoint* resume = nullptr, long long stop_after = -1,
                         const std::filesystem::path& diagnostic_dir = {});

/// Forward pass of a trained generator; output clamped to [-1,1]. Inputs must
/// match the checkpoint's configured image size.
Tensor generate(const Checkpoint& ck, const Tensor& input);
std::vector<Tensor> generate(const Checkpoint& ck, const std::vector<Tensor>& inputs);

}  // namespace pagn
