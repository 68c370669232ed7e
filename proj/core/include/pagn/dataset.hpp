#pragma once

#include <array>
#include <filesystem>

#include "pagn/faces.hpp"

namespace pagn {

struct SyntheticSample {
  int sample_id = 0;
  int split = 0;  // 0 train, 1 test
  int cluster = 0;
  int identity_index = 0;  // global identity id; disjoint across splits
  double age_years = 0;
  IdentitySpec identity;
  Tensor image;  // rendered, bitwise equal to render_face(identity, age_years, size)
};

struct DatasetPartition {
  std::uint64_t master_seed = 0;
  int image_size = 0;
  std::array<std::vector<SyntheticSample>, AgeCluster::count> train, test;

  const std::vector<SyntheticSample>& cluster(int split, int c) const {
    return split == 0 ? train[std::size_t(c)] : test[std::size_t(c)];
  }
};

/// Deterministic partition: identities come from a seeded generator (train and
/// test identity sets are disjoint), ages are uniform within each cluster's
/// range, and every sample renders from seed mix(master_seed, sample_id), so
/// rendering parallelizes without changing results.
DatasetPartition sample_dataset(std::uint64_t master_seed, int identities_per_split,
                                int samples_per_cluster, int image_size);

// Binary PPM (P6, 8-bit) with byte = round((v+1) * 127.5).
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);

/// Writes images plus one manifest CSV per split into `dir`.
void export_dataset(const DatasetPartition& partition, const std::filesystem::path& dir);

}  // namespace pagn
