#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "pagn/dataset.hpp"
#include "pagn/faces.hpp"

using namespace pagn;

TEST_CASE("age parameter mapping") {
  CHECK(AgeParams::from_years(16).wrinkle_count() == 0);
  CHECK(AgeParams::from_years(60).wrinkle_count() == 11);
  CHECK(AgeParams::from_years(16).wrinkle_contrast() == doctest::Approx(0.1));
  CHECK(AgeParams::from_years(60).wrinkle_contrast() == doctest::Approx(0.6));
  CHECK(AgeParams::from_years(40).hair_lightness_shift() == doctest::Approx(0.0));
  CHECK(AgeParams::from_years(60).hair_lightness_shift() == doctest::Approx(0.6));
  CHECK_THROWS_AS(AgeParams::from_years(12), ContractError);
  CHECK_THROWS_AS(render_face(IdentitySpec{}, 61.0, 48), ContractError);
}

TEST_CASE("rendering is deterministic") {
  std::mt19937_64 rng(1);
  const auto id = sample_identity(rng);
  const auto a = render_face(id, 37.5, 48);
  const auto b = render_face(id, 37.5, 48);
  CHECK(a.shape == Shape{3, 48, 48});
  CHECK(a.data == b.data);
  for (float v : a.data) CHECK((v >= -1.0f && v <= 1.0f));
}

TEST_CASE("age factors only touch wrinkle band, hair and under-eye arcs") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    const auto id = sample_identity(rng);
    const int s = 48;
    const auto young = render_face(id, 20.0, s);
    const auto old_ = render_face(id, 55.0, s);
    const int band_top = wrinkle_band_top(s);
    const double hairline = (id.cy - (1.0 - id.hair_region_height) * id.ay) * s;
    const double ey = (id.cy - id.eye_height * id.ay) * s;
    const double re = 0.13 * id.ax * s;
    const int arc_top = int(ey), arc_bot = int(std::ceil(ey + 2.2 * re));
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < s; ++y) {
        if (y >= band_top - 1) continue;            // wrinkle rows
        if (y <= int(std::ceil(hairline)) + 1) continue;  // hair (lightens with age)
        if (y >= arc_top && y <= arc_bot) continue; // under-eye arcs
        for (int x = 0; x < s; ++x) {
          const auto i = (std::size_t(c) * s + y) * s + x;
          REQUIRE(young.data[i] == old_.data[i]);
        }
      }
  }
}

TEST_CASE("oracle_age on clean renders") {
  std::mt19937_64 rng(11);
  const auto id = sample_identity(rng);
  const auto r16 = oracle_age(render_face(id, 16.0, 48));
  REQUIRE(r16.detected);
  CHECK(r16.age_years >= 16.0);
  CHECK(r16.age_years <= 20.0);

  // strong separation between ages from different clusters
  for (int i = 0; i < 100; ++i) {
    std::mt19937_64 r(mix64(100, std::uint64_t(i)));
    const auto idr = sample_identity(r);
    const auto y24 = oracle_age(render_face(idr, 24.0, 48));
    const auto y44 = oracle_age(render_face(idr, 44.0, 48));
    REQUIRE(y24.detected);
    REQUIRE(y44.detected);
    CHECK(y44.age_years - y24.age_years > 10.0);
  }
}

TEST_CASE("oracle_age mean absolute error over a 400-render sweep") {
  double abs_err = 0;
  int n = 0;
  for (int i = 0; i < 400; ++i) {
    std::mt19937_64 r(mix64(4242, std::uint64_t(i)));
    const auto id = sample_identity(r);
    const double age = 16.0 + to_unit(r()) * 44.0;
    const auto est = oracle_age(render_face(id, age, 48));
    REQUIRE(est.detected);
    abs_err += std::abs(est.age_years - age);
    ++n;
  }
  CHECK(abs_err / n <= 2.5);
}

TEST_CASE("oracle_age is non-decreasing in true age") {
  std::mt19937_64 rng(5);
  const auto id = sample_identity(rng);
  double prev = 0;
  for (int a = 16; a <= 60; ++a) {
    const auto est = oracle_age(render_face(id, double(a), 48));
    REQUIRE(est.detected);
    CHECK(est.age_years >= prev);
    prev = est.age_years;
  }
}

TEST_CASE("oracle_age flags featureless images as undetected") {
  const auto est = oracle_age(Tensor::full({3, 48, 48}, -0.5f));
  CHECK(!est.detected);
}

TEST_CASE("identity distance basics") {
  std::mt19937_64 rng(8);
  const auto id = sample_identity(rng);
  const auto img = render_face(id, 30.0, 48);
  const auto same = oracle_identity_distance(img, img);
  REQUIRE(same.detected);
  CHECK(same.distance <= 1e-6);

  const auto other = render_face(id, 50.0, 48);
  const auto dab = oracle_identity_distance(img, other);
  const auto dba = oracle_identity_distance(other, img);
  REQUIRE(dab.detected);
  CHECK(dab.distance == doctest::Approx(dba.distance).epsilon(1e-12));
}

TEST_CASE("identity distance is age-insensitive relative to identity changes") {
  int hold = 0, total = 0;
  for (int i = 0; i < 200; ++i) {
    std::mt19937_64 r(mix64(991, std::uint64_t(i)));
    const auto ida = sample_identity(r);
    const auto idb = sample_identity(r);
    const auto a20 = render_face(ida, 20.0, 48);
    const auto a55 = render_face(ida, 55.0, 48);
    const auto b20 = render_face(idb, 20.0, 48);
    const auto same = oracle_identity_distance(a20, a55);
    const auto diff = oracle_identity_distance(a20, b20);
    REQUIRE(same.detected);
    REQUIRE(diff.detected);
    ++total;
    hold += same.distance < diff.distance ? 1 : 0;
  }
  CHECK(double(hold) / total >= 0.95);
}

TEST_CASE("identity threshold calibration") {
  const auto t = calibrate_identity_threshold(17, 400, 48);
  CHECK(t.tau > 0);
  CHECK(confidence_from_distance(0.0, t.delta0) == doctest::Approx(100.0));
  CHECK(confidence_from_distance(t.tau, t.delta0) == doctest::Approx(76.5).epsilon(1e-9));
  // strictly decreasing in distance
  CHECK(confidence_from_distance(0.1, t.delta0) > confidence_from_distance(0.2, t.delta0));
}

TEST_CASE("dataset partition contract") {
  const auto part = sample_dataset(11, 6, 8, 48);
  for (int c = 0; c < 4; ++c) {
    CHECK(part.train[std::size_t(c)].size() == 8);
    CHECK(part.test[std::size_t(c)].size() == 8);
    for (const auto& s : part.train[std::size_t(c)]) {
      CHECK(s.age_years >= AgeCluster::lo(c));
      CHECK(s.age_years <= AgeCluster::hi(c));
      CHECK(AgeCluster::of_age(s.age_years) == c);
      CHECK(s.identity_index < 6);
    }
    for (const auto& s : part.test[std::size_t(c)]) CHECK(s.identity_index >= 6);
  }

  // same seed -> identical partition; different seed -> different identities
  const auto again = sample_dataset(11, 6, 8, 48);
  CHECK(again.train[0][0].image.data == part.train[0][0].image.data);
  CHECK(again.test[3][7].age_years == part.test[3][7].age_years);
  const auto other = sample_dataset(12, 6, 8, 48);
  CHECK(other.train[0][0].identity.cx != part.train[0][0].identity.cx);
}

TEST_CASE("ppm round trip and export") {
  namespace fs = std::filesystem;
  std::mt19937_64 rng(3);
  const auto id = sample_identity(rng);
  const auto img = render_face(id, 33.0, 48);
  const auto dir = fs::temp_directory_path() / "pagn_faces_test";
  fs::create_directories(dir);
  write_ppm(dir / "t.ppm", img);
  const auto back = read_ppm(dir / "t.ppm");
  REQUIRE(back.shape == img.shape);
  // 8-bit quantization: half a bin in [-1,1] units
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(std::abs(back.data[i] - img.data[i]) <= 1.0f / 127.5f);

  const auto part = sample_dataset(5, 2, 2, 48);
  export_dataset(part, dir / "ds");
  CHECK(fs::exists(dir / "ds" / "manifest_train.csv"));
  CHECK(fs::exists(dir / "ds" / "images" / "test" / "s000009.ppm"));
  fs::remove_all(dir);
}
