#pragma once

#include <array>
#include <filesystem>
#include <functional>

#include "pagn/dataset.hpp"

namespace pagn {

/// Age-progression function for one target cluster ([3,S,S] -> [3,S,S]).
/// Tests inject a passthrough here; the CLI wraps trained checkpoints.
using GeneratorFn = std::function<Tensor(const Tensor&)>;

struct AgingAccuracyRow {
  std::string kind;  // "synthesized" or "natural"
  int cluster = 0;
  double mean_age = 0, std_age = 0;
  int n = 0, undetected = 0;
  std::vector<double> ages;  // per-sample estimates (plot data)
};

struct AgingAccuracyReport {
  std::vector<AgingAccuracyRow> rows;
  const AgingAccuracyRow* find(const std::string& kind, int cluster) const;
};

/// Estimated-age statistics of faces synthesized for clusters 1..3 from every
/// cluster-0 test face, next to the natural-face benchmark over all clusters.
AgingAccuracyReport evaluate_aging_accuracy(const std::array<GeneratorFn, 3>& gens,
                                            const DatasetPartition& part);

struct VerificationCategory {
  std::string name;  // e.g. "test_aged1", "aged2_aged3"
  double mean_conf = 0, std_conf = 0;
  double rate = 0;  // fraction of pairs under the match threshold
  int n = 0, undetected = 0;
  std::vector<double> confidences;  // per-pair values (plot data)
};

struct VerificationReport {
  std::vector<VerificationCategory> categories;  // exactly six
  double tau = 0, delta0 = 1;
  const VerificationCategory* find(const std::string& name) const;
};

/// Six pairwise comparisons per test subject between the input face and its
/// three aged renderings; oracle distances mapped to confidences in [0,100].
VerificationReport evaluate_identity(const std::array<GeneratorFn, 3>& gens,
                                     const DatasetPartition& part,
                                     const IdentityThreshold& threshold);

/// Mean over clusters 1..3 of |synthesized mean - natural benchmark mean|.
double mean_absolute_age_error(const AgingAccuracyReport& report);

struct AblationReport {
  AgingAccuracyReport pyramid_accuracy, one_pathway_accuracy;
  VerificationReport pyramid_identity, one_pathway_identity;
  double pyramid_mae = 0, one_pathway_mae = 0;
  bool pyramid_not_worse = true;  // WARN (not FAIL) when false
};

AblationReport compare_ablation(const std::array<GeneratorFn, 3>& pyramid_gens,
                                const std::array<GeneratorFn, 3>& one_pathway_gens,
                                const DatasetPartition& part, const IdentityThreshold& threshold);

void write_aging_accuracy_csv(const AgingAccuracyReport& r, const std::filesystem::path& path);
void write_verification_csv(const VerificationReport& r, const std::filesystem::path& path);
void write_ablation_csv(const AblationReport& r, const std::filesystem::path& path);
/// One JSON document combining whichever reports are present (nulls allowed).
void write_combined_json(const AgingAccuracyReport* acc, const VerificationReport* ver,
                         const AblationReport* abl, const std::filesystem::path& path);
/// Plot data: per-row age histograms and per-category confidence histograms.
void write_age_histograms(const AgingAccuracyReport& r, const std::filesystem::path& dir);
void write_confidence_distributions(const VerificationReport& r,
                                    const std::filesystem::path& dir);

}  // namespace pagn
