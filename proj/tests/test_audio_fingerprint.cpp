#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "sensorprint/audio_fingerprint.hpp"
#include "sensorprint/rng.hpp"

using namespace sensorprint;

namespace {

// Straight DFT at an arbitrary (possibly fractional-bin) frequency,
// normalized like the quadrature projection. Independent oracle.
double dft_amplitude_at(const Recording& rec, double freq_hz) {
  const std::size_t n = rec.samples.size();
  std::complex<double> acc(0.0, 0.0);
  const double w = 2.0 * kPi * freq_hz / rec.sample_rate;
  for (std::size_t k = 0; k < n; ++k)
    acc += rec.samples[k] *
           std::exp(std::complex<double>(0.0, -w * static_cast<double>(k)));
  return 2.0 / static_cast<double>(n) * std::abs(acc);
}

Recording add(const Recording& a, const Recording& b) {
  REQUIRE(a.samples.size() == b.samples.size());
  Recording out = a;
  for (std::size_t k = 0; k < out.samples.size(); ++k)
    out.samples[k] += b.samples[k];
  return out;
}

}  // namespace

TEST_CASE("one second at 8 kHz yields 8000 samples") {
  const Recording rec = synthesize_tone(220.0, 1.0, 1.0, 8000);
  CHECK(rec.samples.size() == 8000);
  CHECK(rec.sample_rate == 8000);
}

TEST_CASE("zero amplitude synthesizes silence") {
  const Recording rec = synthesize_tone(440.0, 0.0, 0.5, 8000);
  for (double s : rec.samples) REQUIRE(s == 0.0);
}

TEST_CASE("tone starts at phase zero") {
  const Recording rec = synthesize_tone(440.0, 0.7, 1.0, 8000);
  CHECK(rec.samples[0] == 0.0);
  CHECK(rec.samples[1] ==
        Catch::Approx(0.7 * std::sin(2.0 * kPi * 440.0 / 8000.0)));
}

TEST_CASE("tone synthesis rejects bad parameters") {
  CHECK_THROWS_AS(synthesize_tone(4000.0, 1.0, 1.0, 8000), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_tone(0.0, 1.0, 1.0, 8000), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_tone(440.0, 1.0, 0.0, 8000), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_tone(440.0, 1.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("quadrature projection recovers a pure tone's amplitude") {
  const Recording rec = synthesize_tone(440.0, 1.0, 1.0, 8000);
  CHECK(quadrature_response(rec, 440.0, 1) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("quadrature projection of silence is zero") {
  Recording rec;
  rec.samples.assign(8000, 0.0);
  CHECK(quadrature_response(rec, 440.0, 1) == 0.0);
}

TEST_CASE("integer-cycle tones do not leak across probe frequencies") {
  const Recording rec = synthesize_tone(550.0, 1.0, 1.0, 8000);
  CHECK(quadrature_response(rec, 440.0, 1) < 1e-9);
}

TEST_CASE("quadrature response is homogeneous in the signal") {
  Recording rec = synthesize_tone(660.0, 0.4, 1.0, 8000);
  const double base = quadrature_response(rec, 660.0, 1);
  for (double& s : rec.samples) s *= -2.5;
  CHECK(quadrature_response(rec, 660.0, 1) ==
        Catch::Approx(2.5 * base).epsilon(1e-12));
}

TEST_CASE("harmonic index selects multiples of the base frequency") {
  const Recording rec = add(synthesize_tone(220.0, 1.0, 1.0, 8000),
                            synthesize_tone(440.0, 0.1, 1.0, 8000));
  CHECK(quadrature_response(rec, 220.0, 1) == Catch::Approx(1.0).margin(1e-9));
  CHECK(quadrature_response(rec, 220.0, 2) == Catch::Approx(0.1).margin(1e-9));
}

TEST_CASE("quadrature matches an independent DFT on arbitrary signals") {
  Xoshiro256 rng(31337);
  Recording rec;
  rec.sample_rate = 8000;
  rec.samples.resize(4000);
  for (double& s : rec.samples) s = rng.gaussian(0.0, 1.0);
  for (double f : {100.0, 217.5, 440.0, 1320.0}) {
    CHECK(quadrature_response(rec, f, 1) ==
          Catch::Approx(dft_amplitude_at(rec, f)).margin(1e-9));
    CHECK(quadrature_response(rec, f, 2) ==
          Catch::Approx(dft_amplitude_at(rec, 2.0 * f)).margin(1e-9));
  }
}

TEST_CASE("quadrature rejects out-of-range probes") {
  const Recording rec = synthesize_tone(440.0, 1.0, 1.0, 8000);
  CHECK_THROWS_AS(quadrature_response(rec, 440.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(quadrature_response(rec, 2200.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(quadrature_response(Recording{}, 440.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(quadrature_response(rec, 0.5, 1), std::invalid_argument);
}

TEST_CASE("frequency plans carry the documented shapes") {
  const FrequencyPlan seven = FrequencyPlan::seven_tone();
  CHECK(seven.frequencies_hz ==
        std::vector<double>{220, 330, 440, 550, 660, 880, 1320});
  CHECK(seven.harmonics == std::vector<int>{1, 2});
  const FrequencyPlan thirteen = FrequencyPlan::thirteen_tone();
  REQUIRE(thirteen.frequencies_hz.size() == 13);
  CHECK(thirteen.frequencies_hz.front() == 100.0);
  CHECK(thirteen.frequencies_hz.back() == 1300.0);
  CHECK_NOTHROW(seven.validate());
  CHECK_NOTHROW(thirteen.validate());

  FrequencyPlan bad = seven;
  bad.harmonics = {1, 4};  // 1320 * 4 exceeds Nyquist
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("sweep over the default plan yields 7 x 2 entries") {
  const auto play = [](double f) { return synthesize_tone(f, 1.0, 1.0, 8000); };
  const AudioFingerprint fp =
      sweep_fingerprint(play, FrequencyPlan::seven_tone(), 1.0);
  CHECK(fp.size() == 14);
  for (double f : fp.frequencies()) {
    CHECK(fp.at(f, 1) == Catch::Approx(1.0).margin(1e-9));
    CHECK(fp.at(f, 2) == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("sweep normalizes by the played amplitude") {
  const auto play = [](double f) { return synthesize_tone(f, 0.25, 1.0, 8000); };
  const AudioFingerprint fp =
      sweep_fingerprint(play, FrequencyPlan::seven_tone(), 0.25);
  CHECK(fp.at(440.0, 1) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("thirteen-tone sweep yields 13 values per harmonic") {
  const auto play = [](double f) { return synthesize_tone(f, 1.0, 1.0, 8000); };
  const AudioFingerprint fp =
      sweep_fingerprint(play, FrequencyPlan::thirteen_tone(), 1.0);
  CHECK(fp.harmonic_series(1).size() == 13);
  CHECK(fp.harmonic_series(2).size() == 13);
}

TEST_CASE("fingerprint accessors keep frequency order and validate keys") {
  AudioFingerprint fp;
  fp.set(440.0, 1, 0.9);
  fp.set(220.0, 1, 0.5);
  fp.set(330.0, 1, 0.7);
  CHECK(fp.frequencies() == std::vector<double>{220.0, 330.0, 440.0});
  CHECK(fp.harmonic_series(1) == std::vector<double>{0.5, 0.7, 0.9});
  CHECK(fp.contains(330.0, 1));
  CHECK_FALSE(fp.contains(330.0, 2));
  CHECK_THROWS_AS(fp.at(330.0, 2), std::out_of_range);
}

TEST_CASE("spectrum extraction of silence is zero everywhere") {
  Recording rec;
  rec.samples.assign(8000, 0.0);
  const AudioFingerprint fp = stealth_fingerprint(rec, {460.0, 740.0});
  for (const auto& [key, value] : fp.entries()) CHECK(value == 0.0);
}

TEST_CASE("spectrum extraction reads harmonic amplitudes off one capture") {
  // A 500 Hz tone whose loop adds 10% second-harmonic distortion.
  const Recording rec = add(synthesize_tone(500.0, 1.0, 1.0, 8000),
                            synthesize_tone(1000.0, 0.1, 1.0, 8000));
  const AudioFingerprint fp = stealth_fingerprint(rec, {500.0});
  CHECK(fp.at(500.0, 2) == Catch::Approx(0.1).margin(1e-9));
  CHECK(fp.at(500.0, 3) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("simultaneous tones separate exactly like individual sweeps") {
  // Three non-harmonic bases, each with its own distortion profile.
  const std::vector<double> bases = {460.0, 740.0, 1060.0};
  const std::vector<double> h2 = {0.12, 0.07, 0.2};
  const std::vector<double> h3 = {0.05, 0.09, 0.015};

  Recording mix;
  mix.sample_rate = 8000;
  mix.samples.assign(8000, 0.0);
  std::vector<Recording> singles;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    Recording one = synthesize_tone(bases[i], 1.0, 1.0, 8000);
    one = add(one, synthesize_tone(2.0 * bases[i], h2[i], 1.0, 8000));
    one = add(one, synthesize_tone(3.0 * bases[i], h3[i], 1.0, 8000));
    mix = add(mix, one);
    singles.push_back(one);
  }

  const AudioFingerprint stealth = stealth_fingerprint(mix, bases);
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const double sweep2 = quadrature_response(singles[i], bases[i], 2);
    const double sweep3 = quadrature_response(singles[i], bases[i], 3);
    CHECK(stealth.at(bases[i], 2) == Catch::Approx(sweep2).margin(1e-6));
    CHECK(stealth.at(bases[i], 3) == Catch::Approx(sweep3).margin(1e-6));
    CHECK(stealth.at(bases[i], 2) == Catch::Approx(h2[i]).margin(1e-6));
    CHECK(stealth.at(bases[i], 3) == Catch::Approx(h3[i]).margin(1e-6));
  }
}

TEST_CASE("harmonically related bases are rejected") {
  const Recording rec = synthesize_tone(400.0, 1.0, 1.0, 8000);
  CHECK_THROWS_AS(stealth_fingerprint(rec, {400.0, 800.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(stealth_fingerprint(rec, {1400.0}), std::invalid_argument);
  CHECK_THROWS_AS(stealth_fingerprint(Recording{}, {440.0}),
                  std::invalid_argument);
}

TEST_CASE("middle second extracts the central window") {
  Recording rec;
  rec.sample_rate = 8000;
  rec.samples.resize(24000);
  for (std::size_t k = 0; k < rec.samples.size(); ++k)
    rec.samples[k] = static_cast<double>(k);
  const Recording mid = middle_second(rec);
  REQUIRE(mid.samples.size() == 8000);
  CHECK(mid.samples.front() == 8000.0);
  CHECK(mid.samples.back() == 15999.0);

  Recording tiny;
  tiny.sample_rate = 8000;
  tiny.samples.resize(100);
  CHECK_THROWS_AS(middle_second(tiny), std::invalid_argument);
}
