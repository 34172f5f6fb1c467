#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sensorprint/rng.hpp"
#include "sensorprint/sensor_types.hpp"

using namespace sensorprint;

TEST_CASE("face-up gravity is +g on z only") {
  const Vec3 gv = Orientation::face_up().gravity_in_device_frame();
  CHECK(gv.x == 0.0);
  CHECK(gv.y == 0.0);
  CHECK(gv.z == kGravity);
}

TEST_CASE("face-down gravity is -g on z") {
  const Vec3 gv = Orientation::face_down().gravity_in_device_frame();
  CHECK(std::abs(gv.x) < 1e-12);
  CHECK(std::abs(gv.y) < 1e-12);
  CHECK(gv.z == Catch::Approx(-kGravity).margin(1e-12));
}

TEST_CASE("pitch of 90 degrees puts gravity on the x axis") {
  const Orientation o{0.0, kPi / 2.0, 0.0};
  const Vec3 gv = o.gravity_in_device_frame();
  CHECK(gv.x == Catch::Approx(-kGravity).margin(1e-12));
  CHECK(std::abs(gv.y) < 1e-12);
  CHECK(std::abs(gv.z) < 1e-9);
}

TEST_CASE("45 degree roll splits gravity between y and z") {
  const Orientation o{kPi / 4.0, 0.0, 0.0};
  const Vec3 gv = o.gravity_in_device_frame();
  CHECK(gv.y == Catch::Approx(kGravity / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(gv.z == Catch::Approx(kGravity / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("gravity magnitude is g for any attitude") {
  Xoshiro256 rng(2024);
  for (int i = 0; i < 500; ++i) {
    const Orientation o{rng.uniform(-kPi, kPi), rng.uniform(-kPi / 2, kPi / 2),
                        rng.uniform(-kPi, kPi)};
    CHECK(o.gravity_in_device_frame().norm() ==
          Catch::Approx(kGravity).epsilon(1e-12));
  }
}

TEST_CASE("yaw never moves gravity") {
  const Orientation a{0.3, -0.7, 0.0};
  const Orientation b{0.3, -0.7, 2.1};
  const Vec3 ga = a.gravity_in_device_frame();
  const Vec3 gb = b.gravity_in_device_frame();
  CHECK(ga.x == Catch::Approx(gb.x).margin(1e-12));
  CHECK(ga.y == Catch::Approx(gb.y).margin(1e-12));
  CHECK(ga.z == Catch::Approx(gb.z).margin(1e-12));
}

TEST_CASE("from_gravity_direction reproduces the requested direction") {
  Xoshiro256 rng(99);
  for (int i = 0; i < 200; ++i) {
    Vec3 dir{rng.gaussian(0, 1), rng.gaussian(0, 1), rng.gaussian(0, 1)};
    if (dir.norm() < 1e-6) continue;
    const Orientation o = Orientation::from_gravity_direction(dir);
    const Vec3 gv = o.gravity_in_device_frame();
    CHECK(gv.angle_to(dir) < 1e-9);
    CHECK(gv.norm() == Catch::Approx(kGravity).epsilon(1e-12));
  }
}

TEST_CASE("Vec3 angle_to basics") {
  const Vec3 x{1, 0, 0}, y{0, 1, 0};
  CHECK(x.angle_to(y) == Catch::Approx(kPi / 2).epsilon(1e-12));
  CHECK(x.angle_to(x) == Catch::Approx(0.0).margin(1e-9));
  CHECK(x.angle_to({-2, 0, 0}) == Catch::Approx(kPi).epsilon(1e-12));
  CHECK_THROWS_AS(Vec3{}.normalized(), std::invalid_argument);
}

TEST_CASE("calibration validation rejects non-positive sensitivities") {
  AccelCalibration cal;
  CHECK_NOTHROW(cal.validate());
  cal.s_y = 0.0;
  CHECK_THROWS_AS(cal.validate(), std::invalid_argument);
  cal.s_y = -1.0;
  CHECK_THROWS_AS(cal.validate(), std::invalid_argument);
  cal.s_y = 1.0;
  cal.o_x = std::nan("");
  CHECK_THROWS_AS(cal.validate(), std::invalid_argument);
}

TEST_CASE("noise validation rejects negatives") {
  NoiseSpec noise;
  CHECK_NOTHROW(noise.validate());
  noise.accel_sigma = -0.1;
  CHECK_THROWS_AS(noise.validate(), std::invalid_argument);
}

TEST_CASE("response curve interpolates and clamps") {
  ResponseCurve curve;
  curve.freqs_hz = {100.0, 200.0};
  curve.values = {1.0, 3.0};
  CHECK_NOTHROW(curve.validate("test curve"));
  CHECK(curve.at(150.0) == Catch::Approx(2.0));
  CHECK(curve.at(50.0) == 1.0);
  CHECK(curve.at(300.0) == 3.0);
  CHECK(curve.at(100.0) == 1.0);

  SECTION("empty curve evaluates to zero") {
    CHECK(ResponseCurve{}.at(440.0) == 0.0);
  }
  SECTION("descending frequencies are rejected") {
    curve.freqs_hz = {200.0, 100.0};
    CHECK_THROWS_AS(curve.validate("test curve"), std::invalid_argument);
  }
  SECTION("length mismatch is rejected") {
    curve.values = {1.0};
    curve.freqs_hz = {100.0, 200.0};
    CHECK_THROWS_AS(curve.validate("test curve"), std::invalid_argument);
  }
}

TEST_CASE("harmonic coefficients outside [0,1) are rejected") {
  AudioResponseProfile audio;
  CHECK_NOTHROW(audio.validate());
  audio.h2 = 1.0;
  CHECK_THROWS_AS(audio.validate(), std::invalid_argument);
  audio.h2 = 0.0;
  audio.h3 = -0.2;
  CHECK_THROWS_AS(audio.validate(), std::invalid_argument);
}

TEST_CASE("location effect rejects negative excess variance") {
  LocationEffect loc;
  loc.var_db2.freqs_hz = {100.0};
  loc.var_db2.values = {-0.5};
  CHECK_THROWS_AS(loc.validate(), std::invalid_argument);
}
