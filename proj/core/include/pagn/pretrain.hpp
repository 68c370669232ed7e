#pragma once

#include "pagn/config.hpp"
#include "pagn/dataset.hpp"

namespace pagn {

struct PretrainReport {
  std::string which;  // "age" or "id"
  long long iterations = 0;
  std::uint64_t seed = 0;
  double final_loss = 0;
  double heldout_metric = 0;   // cluster accuracy / pair-order accuracy
  double probe_accuracy = 0;   // age: nearest-centroid on pooled deepest-tap features
  double pair_threshold = 0;   // id: embedding-distance threshold at FAR 1e-2

  std::string to_json() const;
};

/// Multi-label (one-vs-all over the four clusters) age classifier training.
/// The returned network is frozen; only its tap features feed the critic.
std::pair<BuiltNetwork, PretrainReport> pretrain_age_extractor(const DatasetPartition& part,
                                                               const RunConfig& cfg,
                                                               long long iterations);

/// Triplet-scheme identity embedder; anchors pair with a same-identity sample
/// from a different cluster, negatives with a different identity.
std::pair<BuiltNetwork, PretrainReport> pretrain_identity_descriptor(const DatasetPartition& part,
                                                                     const RunConfig& cfg,
                                                                     long long iterations,
                                                                     double margin);

/// Embedding of a [3,S,S] image (or [N,3,S,S] batch -> [N,E] rows).
Tensor embed_identity(const NetworkSpec& spec, ParameterSet& params, const Tensor& image);

}  // namespace pagn
