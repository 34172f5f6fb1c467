#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sensorprint/classification.hpp"
#include "sensorprint/rng.hpp"

using namespace sensorprint;

namespace {

AudioFingerprint seven_tone_fp(const std::vector<double>& r1,
                               const std::vector<double>& r2) {
  const std::vector<double> freqs = {220, 330, 440, 550, 660, 880, 1320};
  AudioFingerprint fp;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    fp.set(freqs[i], 1, r1[i]);
    fp.set(freqs[i], 2, r2[i]);
  }
  return fp;
}

}  // namespace

TEST_CASE("feature variants map to the documented layouts") {
  const std::vector<double> r1 = {1, 2, 3, 4, 5, 6, 7};
  const std::vector<double> r2 = {10, 20, 30, 40, 50, 60, 70};
  const AudioFingerprint fp = seven_tone_fp(r1, r2);

  CHECK(extract_features(fp, DistanceVariant::first_harmonic) == r1);
  CHECK(extract_features(fp, DistanceVariant::second_harmonic) == r2);

  const auto b1 = extract_features(fp, DistanceVariant::second_harmonic_d1);
  REQUIRE(b1.size() == 13);  // 7 values + 6 first differences
  CHECK(b1[7] == 10.0);
  CHECK(b1[12] == 10.0);

  const auto b2 = extract_features(fp, DistanceVariant::second_harmonic_d2);
  REQUIRE(b2.size() == 18);  // + 5 second differences
  CHECK(b2[13] == 0.0);
}

TEST_CASE("constant second-harmonic series has zero differences") {
  const AudioFingerprint fp =
      seven_tone_fp({1, 1, 1, 1, 1, 1, 1}, {3, 3, 3, 3, 3, 3, 3});
  const auto features = extract_features(fp, DistanceVariant::second_harmonic_d1);
  for (std::size_t i = 7; i < features.size(); ++i) CHECK(features[i] == 0.0);
}

TEST_CASE("enrollment database rejects malformed rows") {
  FingerprintDb db;
  db.add("dev-a", {1.0, 2.0});
  CHECK_THROWS_AS(db.add("dev-a", {3.0, 4.0}), std::invalid_argument);
  CHECK_THROWS_AS(db.add("dev-b", {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(db.add("dev-c", {}), std::invalid_argument);
  CHECK(db.size() == 1);
  CHECK(db.feature_count() == 2);
}

TEST_CASE("nearest enrolled vector wins") {
  FingerprintDb db;
  db.add("d1", {0.0, 0.0});
  db.add("d2", {1.0, 1.0});
  CHECK(l2_classify(db, {0.1, 0.1}) == "d1");  // 0.02 vs 1.62
  CHECK(l2_classify(db, {0.9, 0.9}) == "d2");
}

TEST_CASE("an exact probe match returns its device") {
  FingerprintDb db;
  db.add("d1", {0.5, -0.25, 3.0});
  db.add("d2", {1.5, 0.75, -1.0});
  CHECK(l2_classify(db, {1.5, 0.75, -1.0}) == "d2");
}

TEST_CASE("identical enrollments resolve to the lowest device id") {
  FingerprintDb db;
  db.add("dev-b", {2.0, 2.0});
  db.add("dev-a", {2.0, 2.0});
  db.add("dev-c", {9.0, 9.0});
  CHECK(l2_classify(db, {2.1, 2.1}) == "dev-a");
}

TEST_CASE("l2 probe length must match the database") {
  FingerprintDb db;
  db.add("d1", {1.0, 2.0});
  CHECK_THROWS_AS(l2_classify(db, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(l2_classify(FingerprintDb{}, {1.0}), std::invalid_argument);
}

TEST_CASE("per-device statistics use the population variance") {
  std::map<std::string, std::vector<std::vector<double>>> samples;
  samples["d1"] = {{2.0}, {4.0}};
  samples["d2"] = {{10.0}, {10.0}};
  const MleModel model = mle_fit(samples);
  CHECK(model.devices.at("d1").mean[0] == 3.0);
  CHECK(model.devices.at("d1").variance[0] == 1.0);
  CHECK(model.devices.at("d2").mean[0] == 10.0);
  CHECK(model.devices.at("d2").variance[0] == kVarianceFloor);
  CHECK(model.feature_count == 1);
}

TEST_CASE("model fitting validates its inputs") {
  std::map<std::string, std::vector<std::vector<double>>> samples;
  samples["d1"] = {{1.0}};
  CHECK_THROWS_AS(mle_fit(samples), std::invalid_argument);  // needs >= 2
  samples["d1"] = {{1.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(mle_fit(samples), std::invalid_argument);  // ragged
  CHECK_THROWS_AS(mle_fit({}), std::invalid_argument);
}

TEST_CASE("variance weighting can overturn the nearest mean") {
  std::map<std::string, std::vector<std::vector<double>>> samples;
  // Device 1: mean 0, variance 1. Device 2: mean 1, variance 100.
  samples["device-1"] = {{-1.0}, {1.0}};
  samples["device-2"] = {{-9.0}, {11.0}};
  const MleModel model = mle_fit(samples);
  REQUIRE(model.devices.at("device-1").variance[0] == 1.0);
  REQUIRE(model.devices.at("device-2").variance[0] == 100.0);
  // Probe 0.6 is nearer device-1's mean, but device-2's log-likelihood
  // wins: -0.36 against -0.0016.
  CHECK(mle_classify(model, {0.6}) == "device-2");
}

TEST_CASE("equal variances reduce the MLE rule to nearest mean") {
  Xoshiro256 rng(271828);
  for (int trial = 0; trial < 20; ++trial) {
    std::map<std::string, std::vector<std::vector<double>>> samples;
    FingerprintDb means;
    for (int d = 0; d < 5; ++d) {
      const std::string id = "dev-" + std::to_string(d);
      std::vector<double> center(4);
      for (double& c : center) c = rng.uniform(-1.0, 1.0);
      // Symmetric pair around the center: variance equal per feature pair.
      std::vector<double> lo(4), hi(4);
      for (std::size_t i = 0; i < 4; ++i) {
        lo[i] = center[i] - 0.3;
        hi[i] = center[i] + 0.3;
      }
      samples[id] = {lo, hi};
      means.add(id, center);
    }
    const MleModel model = mle_fit(samples);
    std::vector<double> probe(4);
    for (double& p : probe) p = rng.uniform(-1.2, 1.2);
    CHECK(mle_classify(model, probe) == l2_classify(means, probe));
  }
}

TEST_CASE("mle probe length must match the model") {
  std::map<std::string, std::vector<std::vector<double>>> samples;
  samples["d1"] = {{1.0, 2.0}, {2.0, 3.0}};
  const MleModel model = mle_fit(samples);
  CHECK_THROWS_AS(mle_classify(model, {1.0}), std::invalid_argument);
}

TEST_CASE("scaled accelerometer distance") {
  const ZAxisFingerprint a{0.2, 1.01};
  CHECK(scaled_accel_distance(a, a, {}) == 0.0);

  const ZAxisFingerprint p{0.0, 1.00};
  const ZAxisFingerprint q{0.1, 1.01};
  ScaledDistanceConfig cfg;
  cfg.m_sz = 300.0;
  CHECK(scaled_accel_distance(p, q, cfg) == Catch::Approx(0.04).margin(1e-12));
  cfg.m_sz = 0.0;
  CHECK(scaled_accel_distance(p, q, cfg) == Catch::Approx(0.01).margin(1e-12));
  cfg.m_sz = -1.0;
  CHECK_THROWS_AS(scaled_accel_distance(p, q, cfg), std::invalid_argument);
}

TEST_CASE("k nearest neighbors majority vote") {
  std::vector<LabeledPoint> pts = {
      {{0.0}, "X"}, {{1.0}, "X"}, {{0.25}, "Y"},
  };
  SECTION("exact match at k = 1") {
    CHECK(knn_classify(pts, {1.0}, 1) == "X");
  }
  SECTION("majority beats proximity at k = 3") {
    // Y is nearest to the probe, but both X points vote at k = 3.
    CHECK(knn_classify(pts, {0.3}, 3) == "X");
  }
  SECTION("full tie goes to the lowest label") {
    std::vector<LabeledPoint> distinct = {
        {{0.0}, "ccc"}, {{1.0}, "aaa"}, {{2.0}, "bbb"}};
    CHECK(knn_classify(distinct, {5.0}, 3) == "aaa");
  }
  SECTION("parameter validation") {
    CHECK_THROWS_AS(knn_classify(pts, {0.0}, 0), std::invalid_argument);
    CHECK_THROWS_AS(knn_classify(pts, {0.0}, 4), std::invalid_argument);
    CHECK_THROWS_AS(knn_classify(pts, {0.0, 1.0}, 1), std::invalid_argument);
  }
}

TEST_CASE("distance ties keep insertion order") {
  std::vector<LabeledPoint> pts = {
      {{1.0}, "first"}, {{-1.0}, "second"}, {{1.0}, "third"}};
  // All at distance 1 from the probe; k = 1 takes the earliest inserted.
  CHECK(knn_classify(pts, {0.0}, 1) == "first");
}

TEST_CASE("separable clusters cross-validate perfectly") {
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 10; ++i) {
    pts.push_back({{static_cast<double>(i) * 0.01, 0.0}, "left"});
    pts.push_back({{10.0 + static_cast<double>(i) * 0.01, 0.0}, "right"});
  }
  const KfoldResult r = kfold_accuracy(std::span<const LabeledPoint>(pts), 5,
                                       knn_classifier(1), 3);
  CHECK(r.accuracy == 1.0);
  CHECK_FALSE(r.small_class_warning);
}

TEST_CASE("random labels on identical vectors score near chance") {
  Xoshiro256 rng(1001);
  double total = 0.0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    std::vector<LabeledPoint> pts;
    for (int i = 0; i < 40; ++i)
      pts.push_back({{rng.uniform01() * 1e-12}, rng.uniform01() < 0.5 ? "a" : "b"});
    total += kfold_accuracy(std::span<const LabeledPoint>(pts), 4,
                            knn_classifier(5), 77 + s)
                 .accuracy;
  }
  CHECK(std::abs(total / seeds - 0.5) < 0.15);
}

TEST_CASE("cross-validation is deterministic in the seed") {
  Xoshiro256 rng(9);
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 30; ++i)
    pts.push_back({{rng.gaussian(0, 1), rng.gaussian(0, 1)},
                   i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c")});
  const auto r1 = kfold_accuracy(std::span<const LabeledPoint>(pts), 5,
                                 knn_classifier(3), 42);
  const auto r2 = kfold_accuracy(std::span<const LabeledPoint>(pts), 5,
                                 knn_classifier(3), 42);
  CHECK(r1.accuracy == r2.accuracy);
}

TEST_CASE("small classes raise the warning flag") {
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({{double(i)}, "big"});
  pts.push_back({{100.0}, "tiny"});  // 1 member < folds
  const auto r = kfold_accuracy(std::span<const LabeledPoint>(pts), 4,
                                knn_classifier(1), 1);
  CHECK(r.small_class_warning);
}

TEST_CASE("cross-validation validates folds") {
  std::vector<LabeledPoint> pts = {{{0.0}, "a"}, {{1.0}, "b"}};
  CHECK_THROWS_AS(kfold_accuracy(std::span<const LabeledPoint>(pts), 1,
                                 knn_classifier(1), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(kfold_accuracy(std::span<const LabeledPoint>(pts), 3,
                                 knn_classifier(1), 1),
                  std::invalid_argument);
}
