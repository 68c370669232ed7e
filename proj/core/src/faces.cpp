#include "pagn/faces.hpp"

#include <algorithm>
#include <cmath>

namespace pagn {

namespace {

constexpr double kEyeTone = 0.06;
constexpr double kArcDarken = 0.72;
constexpr double kEyeRadiusFrac = 0.13;   // of ax
constexpr double kLineHalfWidth = 0.60;   // of ax
constexpr double kMouthRowFrac = 0.30;    // of ay below center
constexpr double kHairAxScale = 1.12;
constexpr double kHairAyScale = 1.04;

struct Canvas {
  int n = 0;
  std::vector<double> rgb;  // [3][n][n]
  double& at(int c, int y, int x) { return rgb[std::size_t(c * n + y) * n + x]; }
  double at(int c, int y, int x) const { return rgb[std::size_t(c * n + y) * n + x]; }
};

double uni(std::mt19937_64& rng, double lo, double hi) { return lo + to_unit(rng()) * (hi - lo); }

}  // namespace

void IdentitySpec::validate() const {
  auto frac = [](double v) { return v > 0.0 && v < 1.0; };
  check(frac(cx) && frac(cy) && frac(ax) && frac(ay) && frac(eye_spacing) && frac(eye_height) &&
            frac(mouth_width) && frac(hair_region_height),
        "identity: fractions must lie in (0,1)");
  check(cx - ax > 0.0 && cx + ax < 1.0 && cy - ay > 0.0 && cy + ay < 1.0,
        "identity: face ellipse must lie inside the image");
  for (double v : skin) check(v >= 0.2 && v <= 0.9, "identity: skin tone out of [0.2,0.9]");
  for (double v : hair) check(v >= 0.0 && v <= 1.0, "identity: hair tone out of [0,1]");
}

IdentitySpec sample_identity(std::mt19937_64& rng) {
  IdentitySpec id;
  id.cx = uni(rng, 0.47, 0.53);
  id.cy = uni(rng, 0.46, 0.50);
  id.ax = uni(rng, 0.24, 0.32);
  id.ay = uni(rng, 0.38, 0.42);
  // warm skin: r > g > b with margin, so a channel-ratio test finds the face
  id.skin[0] = uni(rng, 0.55, 0.85);
  id.skin[1] = id.skin[0] * uni(rng, 0.70, 0.82);
  id.skin[2] = id.skin[1] * uni(rng, 0.65, 0.80);
  id.eye_spacing = uni(rng, 0.35, 0.55);
  id.eye_height = uni(rng, 0.30, 0.40);
  id.mouth_width = uni(rng, 0.32, 0.55);
  id.hair_region_height = uni(rng, 0.25, 0.45);
  // cool near-neutral hair stays outside the warm skin classifier at any age
  const double hv = uni(rng, 0.10, 0.30);
  id.hair[0] = hv * uni(rng, 0.92, 1.00);
  id.hair[1] = hv;
  id.hair[2] = std::min(0.9, hv * uni(rng, 1.00, 1.10));
  id.validate();
  return id;
}

AgeParams AgeParams::from_years(double age) {
  check(age >= 16.0 && age <= 60.0, "age: years must lie in [16,60]");
  return AgeParams{age};
}
int AgeParams::wrinkle_count() const { return int(std::llround((age_years - 16.0) / 4.0)); }
double AgeParams::wrinkle_contrast() const { return 0.1 + 0.5 * (age_years - 16.0) / 44.0; }
double AgeParams::hair_lightness_shift() const {
  return 0.6 * std::max(0.0, age_years - 40.0) / 20.0;
}

double AgeCluster::lo(int cluster) {
  check(cluster >= 0 && cluster < count, "age cluster: index out of range");
  const double v[] = {16, 31, 41, 51};
  return v[cluster];
}
double AgeCluster::hi(int cluster) {
  check(cluster >= 0 && cluster < count, "age cluster: index out of range");
  const double v[] = {30, 40, 50, 60};
  return v[cluster];
}
int AgeCluster::of_age(double age) {
  if (age < 31) return 0;
  if (age < 41) return 1;
  if (age < 51) return 2;
  return 3;
}

int wrinkle_band_top(int size) { return int(std::lround(0.50 * size)); }
int wrinkle_row_pitch(int size) { return std::max(2, int(std::lround(size / 24.0))); }

Tensor render_face(const IdentitySpec& identity, double age_years, int size) {
  identity.validate();
  check(size >= 32, "render_face: size must be at least 32");
  const AgeParams age = AgeParams::from_years(age_years);

  const int ss = 2 * size;  // 2x supersampling provides the anti-aliasing
  Canvas cv;
  cv.n = ss;
  cv.rgb.assign(std::size_t(3) * ss * ss, 0.0);

  const double cx = identity.cx * ss, cy = identity.cy * ss;
  const double ax = identity.ax * ss, ay = identity.ay * ss;
  const double hax = ax * kHairAxScale, hay = ay * kHairAyScale;
  const double hairline = cy - (1.0 - identity.hair_region_height) * ay;
  const double ex_off = identity.eye_spacing * ax;
  const double ey = cy - identity.eye_height * ay;
  const double re = kEyeRadiusFrac * ax;
  const double shift = age.hair_lightness_shift();
  double hair[3];
  for (int c = 0; c < 3; ++c) hair[c] = identity.hair[c] + shift * (0.85 - identity.hair[c]);

  // base layers: background gradient, hair crescent, skin ellipse, eyes
  for (int y = 0; y < ss; ++y) {
    const double yc = y + 0.5;
    const double bg = 0.15 + 0.20 * (yc / ss);
    for (int x = 0; x < ss; ++x) {
      const double xc = x + 0.5;
      double col[3] = {bg, bg, bg};
      const double hdx = (xc - cx) / hax, hdy = (yc - cy) / hay;
      if (hdx * hdx + hdy * hdy <= 1.0 && yc <= hairline)
        for (int c = 0; c < 3; ++c) col[c] = hair[c];
      const double fdx = (xc - cx) / ax, fdy = (yc - cy) / ay;
      if (fdx * fdx + fdy * fdy <= 1.0)
        for (int c = 0; c < 3; ++c) col[c] = identity.skin[c];
      for (int s = -1; s <= 1; s += 2) {
        const double ddx = xc - (cx + s * ex_off), ddy = yc - ey;
        if (ddx * ddx + ddy * ddy <= re * re)
          for (int c = 0; c < 3; ++c) col[c] = kEyeTone;
      }
      for (int c = 0; c < 3; ++c) cv.at(c, y, x) = col[c];
    }
  }

  // under-eye arcs appear past age 40
  if (age_years > 40.0) {
    for (int s = -1; s <= 1; s += 2) {
      const double ex = cx + s * ex_off;
      const int x0 = std::max(0, int(ex - 1.1 * re)), x1 = std::min(ss - 1, int(ex + 1.1 * re));
      const int y0 = std::max(0, int(ey + 1.3 * re)), y1 = std::min(ss - 1, int(ey + 1.9 * re));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
          for (int c = 0; c < 3; ++c) cv.at(c, y, x) *= kArcDarken;
    }
  }

  // mouth: reddened but luminance-neutral, so it never reads as a wrinkle dip
  {
    const double my = cy + kMouthRowFrac * ay;
    const double hm = std::max(2.0, 0.05 * ay);
    const double hw = identity.mouth_width * ax;
    const int y0 = std::max(0, int(my - hm)), y1 = std::min(ss - 1, int(my + hm));
    const int x0 = std::max(0, int(cx - hw)), x1 = std::min(ss - 1, int(cx + hw));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double fdx = (x + 0.5 - cx) / ax, fdy = (y + 0.5 - cy) / ay;
        if (fdx * fdx + fdy * fdy > 1.0) continue;
        const double r = cv.at(0, y, x);
        const double d = std::min(0.18, 1.0 - r);
        cv.at(0, y, x) = r + d;
        cv.at(1, y, x) -= d / 2;
        cv.at(2, y, x) -= d / 2;
      }
  }

  // wrinkle lines: fixed-pitch dark rows of constant width across the lower face
  {
    const int band_top = wrinkle_band_top(size);
    const int pitch = wrinkle_row_pitch(size);
    const double kappa = age.wrinkle_contrast();
    const double hw = kLineHalfWidth * ax;
    const int x0 = std::max(0, int(cx - hw)), x1 = std::min(ss - 1, int(cx + hw));
    for (int i = 0; i < age.wrinkle_count(); ++i) {
      const int row = band_top + pitch * i;  // output-pixel row
      if (2 * row + 1 >= ss) break;
      for (int y = 2 * row; y <= 2 * row + 1; ++y)
        for (int x = x0; x <= x1; ++x)
          for (int c = 0; c < 3; ++c) cv.at(c, y, x) *= (1.0 - kappa);
    }
  }

  // box downsample and map [0,1] -> [-1,1]
  Tensor out({3, size, size});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double v = 0.25 * (cv.at(c, 2 * y, 2 * x) + cv.at(c, 2 * y, 2 * x + 1) +
                                 cv.at(c, 2 * y + 1, 2 * x) + cv.at(c, 2 * y + 1, 2 * x + 1));
        out.data[(std::size_t(c) * size + y) * size + x] =
            float(std::clamp(2.0 * v - 1.0, -1.0, 1.0));
      }
  return out;
}

namespace {

struct FaceStats {
  bool ok = false;
  double cx = 0, cy = 0, sx = 0, sy = 0;      // centroid and 2*sigma, image fractions
  double eye_dx = 0, eye_y = 0;               // eye separation and height
  double tone[3] = {0, 0, 0};                 // median skin tone above the wrinkle band
};

// Channel-ratio skin test; invariant to the multiplicative wrinkle darkening.
inline bool is_skin(double r, double g, double b) {
  return r >= 1.15 * b && r >= 1.05 * g && (r + g + b) / 3.0 >= 0.12;
}

FaceStats extract_face_stats(const Tensor& img) {
  FaceStats st;
  if (img.rank() != 3 || img.dim(0) != 3 || img.dim(1) != img.dim(2)) return st;
  const int s = img.dim(1);
  auto px = [&](int c, int y, int x) {
    return std::clamp((double(img.data[(std::size_t(c) * s + y) * s + x]) + 1.0) / 2.0, 0.0, 1.0);
  };

  const int band_top = wrinkle_band_top(s);
  std::int64_t count = 0;
  double sum_x = 0, sum_y = 0, sum_xx = 0, sum_yy = 0;
  std::vector<float> tr, tg, tb;
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const double r = px(0, y, x), g = px(1, y, x), b = px(2, y, x);
      if (!is_skin(r, g, b)) continue;
      ++count;
      sum_x += x;
      sum_y += y;
      sum_xx += double(x) * x;
      sum_yy += double(y) * y;
      if (y < band_top) {
        tr.push_back(float(r));
        tg.push_back(float(g));
        tb.push_back(float(b));
      }
    }
  if (count < std::int64_t(s) * s / 50 || tr.size() < 8) return st;  // undetected face

  const double mx = sum_x / double(count), my = sum_y / double(count);
  const double vx = sum_xx / double(count) - mx * mx;
  const double vy = sum_yy / double(count) - my * my;
  st.cx = mx / s;
  st.cy = my / s;
  st.sx = 2.0 * std::sqrt(std::max(0.0, vx)) / s;
  st.sy = 2.0 * std::sqrt(std::max(0.0, vy)) / s;

  auto median = [](std::vector<float>& v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return double(v[v.size() / 2]);
  };
  st.tone[0] = median(tr);
  st.tone[1] = median(tg);
  st.tone[2] = median(tb);

  // eyes: dark pixels in the upper face split left/right of the centroid
  double lx = 0, ly = 0, rx = 0, ry = 0;
  int ln = 0, rn = 0;
  for (int y = 0; y < int(my); ++y)
    for (int x = 0; x < s; ++x) {
      const double lum = (px(0, y, x) + px(1, y, x) + px(2, y, x)) / 3.0;
      if (lum >= 0.22) continue;
      if (std::abs(x - mx) > 2.2 * st.sx * s || std::abs(y - my) > 2.2 * st.sy * s) continue;
      if (x < mx) {
        lx += x;
        ly += y;
        ++ln;
      } else {
        rx += x;
        ry += y;
        ++rn;
      }
    }
  if (ln < 3 || rn < 3) return st;  // eyes undetected
  st.eye_dx = (rx / rn - lx / ln) / s;
  st.eye_y = (my - 0.5 * (ly / ln + ry / rn)) / s;
  st.ok = true;
  return st;
}

int count_wrinkle_dips(const Tensor& img, const FaceStats& st) {
  const int s = img.dim(1);
  auto px = [&](int c, int y, int x) {
    return std::clamp((double(img.data[(std::size_t(c) * s + y) * s + x]) + 1.0) / 2.0, 0.0, 1.0);
  };
  const int band_top = wrinkle_band_top(s);
  const int pitch = wrinkle_row_pitch(s);
  const double half_w = std::max(1.0, 0.85 * kLineHalfWidth * (st.sx * s));
  const int x0 = std::max(0, int(st.cx * s - half_w));
  const int x1 = std::min(s - 1, int(st.cx * s + half_w));

  auto row_mean = [&](int y) {
    double acc = 0;
    for (int x = x0; x <= x1; ++x) acc += (px(0, y, x) + px(1, y, x) + px(2, y, x)) / 3.0;
    return acc / double(x1 - x0 + 1);
  };

  double dips[12] = {0};
  int probes = 0;
  for (int i = 0; i < 12; ++i) {
    const int row = band_top + pitch * i;
    if (row - 1 < 0 || row + 1 >= s) break;
    const double base = 0.5 * (row_mean(row - 1) + row_mean(row + 1));
    dips[i] = base - row_mean(row);
    ++probes;
  }
  double max_dip = 0;
  for (int i = 0; i < probes; ++i) max_dip = std::max(max_dip, dips[i]);
  const double threshold = std::max(0.015, 0.35 * max_dip);
  int count = 0;
  for (int i = 0; i < probes && i < 11; ++i) count += dips[i] > threshold ? 1 : 0;
  return count;
}

}  // namespace

OracleAge oracle_age(const Tensor& image) {
  OracleAge out;
  const FaceStats st = extract_face_stats(image);
  if (!st.ok) return out;
  const int count = count_wrinkle_dips(image, st);
  out.detected = true;
  out.age_years = std::clamp(16.0 + 4.0 * count, 16.0, 64.0);
  return out;
}

OracleDistance oracle_identity_distance(const Tensor& a, const Tensor& b) {
  OracleDistance out;
  const FaceStats sa = extract_face_stats(a);
  const FaceStats sb = extract_face_stats(b);
  if (!sa.ok || !sb.ok) return out;
  const double d[9] = {sa.cx - sb.cx,           sa.cy - sb.cy,     sa.sx - sb.sx,
                       sa.sy - sb.sy,           sa.eye_dx - sb.eye_dx,
                       sa.eye_y - sb.eye_y,     sa.tone[0] - sb.tone[0],
                       sa.tone[1] - sb.tone[1], sa.tone[2] - sb.tone[2]};
  double acc = 0;
  for (double v : d) acc += v * v;
  out.detected = true;
  out.distance = std::sqrt(acc);
  return out;
}

IdentityThreshold calibrate_identity_threshold(std::uint64_t seed, int n_pairs, int image_size) {
  check(n_pairs >= 50, "identity threshold: need at least 50 calibration pairs");
  std::vector<double> dists;
  dists.reserve(std::size_t(n_pairs));
  for (int i = 0; i < n_pairs; ++i) {
    std::mt19937_64 rng(mix64(seed, 0xca11b000 + std::uint64_t(i)));
    const IdentitySpec ida = sample_identity(rng);
    const IdentitySpec idb = sample_identity(rng);
    const double aa = uni(rng, 16.0, 60.0), ab = uni(rng, 16.0, 60.0);
    const auto d =
        oracle_identity_distance(render_face(ida, aa, image_size), render_face(idb, ab, image_size));
    if (d.detected) dists.push_back(d.distance);
  }
  check(dists.size() >= std::size_t(n_pairs) * 9 / 10,
        "identity threshold: too many undetected calibration renders");
  std::sort(dists.begin(), dists.end());
  IdentityThreshold t;
  t.tau = dists[dists.size() / 100];  // false-accept rate 1e-2
  t.delta0 = t.tau / std::log(100.0 / 76.5);
  return t;
}

double confidence_from_distance(double distance, double delta0) {
  return 100.0 * std::exp(-std::max(0.0, distance) / delta0);
}

}  // namespace pagn
