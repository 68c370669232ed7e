#pragma once

#include <cstdint>
#include <random>

#include "pagn/tensor.hpp"

namespace pagn {

/// Stable, person-specific rendering factors. All fractions are relative to
/// the image side; the face ellipse must lie fully inside the image.
struct IdentitySpec {
  double cx = 0.5, cy = 0.48;   // ellipse center
  double ax = 0.28, ay = 0.40;  // ellipse semi-axes
  double skin[3] = {0.75, 0.58, 0.44};
  double eye_spacing = 0.45;    // eye offset from center, fraction of ax
  double eye_height = 0.34;     // eye row above center, fraction of ay
  double mouth_width = 0.42;    // mouth half-width, fraction of ax
  double hair_region_height = 0.35;
  double hair[3] = {0.18, 0.18, 0.20};

  void validate() const;
};

IdentitySpec sample_identity(std::mt19937_64& rng);

/// Deterministic age-to-appearance mapping.
struct AgeParams {
  double age_years;

  static AgeParams from_years(double age);
  int wrinkle_count() const;          // round((age-16)/4), 0..11
  double wrinkle_contrast() const;    // 0.1 + 0.5*(age-16)/44
  double hair_lightness_shift() const;  // 0.6*max(0, age-40)/20
};

/// Decade-wide age brackets; cluster 0 is the only progression source.
struct AgeCluster {
  static constexpr int count = 4;
  static double lo(int cluster);        // sampling lower bound
  static double hi(int cluster);        // sampling upper bound
  static int of_age(double age_years);  // nominal ranges [14-30][31-40][41-50][51-60]
};

/// Renders a portrait at `size` x `size`; channels-first RGB in [-1,1].
/// Pure function of its arguments (bitwise reproducible).
Tensor render_face(const IdentitySpec& identity, double age_years, int size);

// Renderer conventions shared with the oracles.
int wrinkle_band_top(int size);   // first candidate wrinkle row
int wrinkle_row_pitch(int size);  // distance between wrinkle rows

struct OracleAge {
  bool detected = false;
  double age_years = 0;  // in [16,64] when detected
};

/// Counts wrinkle-line dips in the lower-face band of the row-mean intensity
/// profile and inverts the wrinkle-count mapping back to years.
OracleAge oracle_age(const Tensor& image);

struct OracleDistance {
  bool detected = false;
  double distance = 0;  // >= 0
};

/// Euclidean distance between geometry/tone descriptors of the two faces.
/// The descriptor excludes the wrinkle band and hair, so it is insensitive
/// to the age factors by construction.
OracleDistance oracle_identity_distance(const Tensor& a, const Tensor& b);

struct IdentityThreshold {
  double tau = 0;     // match threshold at false-accept rate 1e-2
  double delta0 = 1;  // confidence scale: conf = 100*exp(-d/delta0)
};

/// Calibrates the match threshold on a seeded set of different-identity pairs
/// of clean renders; delta0 anchors the threshold to confidence 76.5.
IdentityThreshold calibrate_identity_threshold(std::uint64_t seed, int n_pairs, int image_size);

double confidence_from_distance(double distance, double delta0);

}  // namespace pagn
