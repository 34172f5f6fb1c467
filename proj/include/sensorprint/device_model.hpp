#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sensorprint/accel_fingerprint.hpp"
#include "sensorprint/rng.hpp"
#include "sensorprint/sensor_types.hpp"

namespace sensorprint {

namespace detail {

// Substream tags. Every simulation operation derives its generator from
// (caller seed, tag, operation inputs) so results never depend on the order
// in which operations run.
inline constexpr std::uint64_t kSeedPopulation = 1;
inline constexpr std::uint64_t kSeedAudioGain = 2;
inline constexpr std::uint64_t kSeedAudioNoise = 3;
inline constexpr std::uint64_t kSeedRestNoise = 4;
inline constexpr std::uint64_t kSeedMultiplicity = 5;
inline constexpr std::uint64_t kSeedSubmission = 6;

}  // namespace detail

/// One scalar sampling distribution. Uniform draws from [a, b]; gaussian
/// treats a as the mean and b as the standard deviation.
struct ParamDist {
  enum class Kind { uniform, gaussian };

  Kind kind = Kind::uniform;
  double a = 0.0;
  double b = 0.0;

  static ParamDist uniform(double lo, double hi) {
    return {Kind::uniform, lo, hi};
  }
  static ParamDist gaussian(double mean, double sigma) {
    return {Kind::gaussian, mean, sigma};
  }

  void validate(const char* what) const {
    if (!std::isfinite(a) || !std::isfinite(b))
      throw std::invalid_argument(std::string(what) + ": non-finite parameter");
    if (kind == Kind::uniform && a > b)
      throw std::invalid_argument(std::string(what) + ": uniform min > max");
    if (kind == Kind::gaussian && b < 0.0)
      throw std::invalid_argument(std::string(what) + ": negative std dev");
  }

  double sample(Xoshiro256& rng) const {
    return kind == Kind::uniform ? rng.uniform(a, b) : rng.gaussian(a, b);
  }

  /// Draw until the value lands in [lo, hi]. Gaussian tails can leave the
  /// legal domain of a parameter; a bounded retry keeps sampling total.
  double sample_in(Xoshiro256& rng, double lo, double hi) const {
    for (int tries = 0; tries < 1000; ++tries) {
      const double v = sample(rng);
      if (v >= lo && v <= hi) return v;
    }
    throw std::invalid_argument(
        "distribution almost never produces values in the legal domain");
  }
};

struct UserAgentEntry {
  std::string user_agent;
  double weight = 1.0;
};

/// Synthetic User-Agent catalog with a long-tail (1/rank) weighting, like
/// real browser share tables: a few very common strings and many rare ones.
inline std::vector<UserAgentEntry> make_synthetic_ua_catalog(std::size_t n) {
  if (n == 0) throw std::invalid_argument("catalog size must be >= 1");
  static const char* const kOs[] = {"Android 10", "Android 11", "Android 12",
                                    "Android 13", "Android 14"};
  static const char* const kModel[] = {"SM-G991B", "Pixel 6", "SM-A528B",
                                       "Pixel 7a", "M2101K6G", "CPH2409",
                                       "SM-S918B"};
  std::vector<UserAgentEntry> catalog;
  catalog.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const char* os = kOs[k % (sizeof(kOs) / sizeof(kOs[0]))];
    const char* model = kModel[k % (sizeof(kModel) / sizeof(kModel[0]))];
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "Mozilla/5.0 (Linux; %s; %s) AppleWebKit/537.36 (KHTML, "
                  "like Gecko) Chrome/%zu.0.0.0 Mobile Safari/537.36",
                  os, model, 96 + k);
    catalog.push_back({buf, 1.0 / static_cast<double>(k + 1)});
  }
  return catalog;
}

/// Sampling configuration for a synthetic device population: one
/// distribution per calibration parameter, a gain tolerance band for the
/// audio loop, harmonic distortion ranges, the User-Agent catalog, and the
/// measurement noise every sampled device inherits.
struct PopulationRanges {
  ParamDist s_x = ParamDist::uniform(0.99, 1.04);
  ParamDist s_y = ParamDist::uniform(0.99, 1.04);
  ParamDist s_z = ParamDist::uniform(0.99, 1.04);
  ParamDist o_x = ParamDist::uniform(-0.5, 0.5);
  ParamDist o_y = ParamDist::uniform(-0.5, 0.5);
  ParamDist o_z = ParamDist::uniform(-0.5, 0.5);

  /// Per-frequency gain deviation is drawn uniformly from ±tolerance.
  double audio_tolerance_db = 2.0;
  /// Frequencies at which each device's gain curve is tabulated.
  std::vector<double> profile_freqs_hz = default_profile_freqs();

  ParamDist h2 = ParamDist::uniform(0.02, 0.2);
  ParamDist h3 = ParamDist::uniform(0.01, 0.1);

  std::vector<UserAgentEntry> user_agents = make_synthetic_ua_catalog(5);
  NoiseSpec noise;

  static std::vector<double> default_profile_freqs() {
    std::vector<double> f;
    for (int hz = 100; hz <= 2000; hz += 100)
      f.push_back(static_cast<double>(hz));
    return f;
  }

  void validate() const {
    s_x.validate("s_x");
    s_y.validate("s_y");
    s_z.validate("s_z");
    o_x.validate("o_x");
    o_y.validate("o_y");
    o_z.validate("o_z");
    h2.validate("h2");
    h3.validate("h3");
    if (!(audio_tolerance_db >= 0.0) || !std::isfinite(audio_tolerance_db))
      throw std::invalid_argument("audio tolerance must be >= 0 dB");
    ResponseCurve probe{profile_freqs_hz,
                        std::vector<double>(profile_freqs_hz.size(), 0.0)};
    probe.validate("profile frequencies");
    if (user_agents.empty())
      throw std::invalid_argument("user agent catalog is empty");
    for (const auto& [ua, w] : user_agents)
      if (!(w > 0.0) || !std::isfinite(w))
        throw std::invalid_argument("user agent weights must be positive");
    for (const ParamDist* s : {&s_x, &s_y, &s_z})
      if (s->kind == ParamDist::Kind::uniform && s->a <= 0.0)
        throw std::invalid_argument("sensitivity range must stay positive");
    noise.validate();
  }
};

namespace detail {

inline std::string pick_user_agent(const std::vector<UserAgentEntry>& catalog,
                                   Xoshiro256& rng) {
  double total = 0.0;
  for (const auto& e : catalog) total += e.weight;
  const double u = rng.uniform01() * total;
  double cum = 0.0;
  for (const auto& e : catalog) {
    cum += e.weight;
    if (u < cum) return e.user_agent;
  }
  return catalog.back().user_agent;
}

}  // namespace detail

/// Draws `n` device profiles. Each device gets its own substream keyed by
/// index, so the profile of device i never depends on n or on the other
/// devices. Identifiers are zero-padded so lexicographic equals numeric
/// order.
inline std::vector<DeviceProfile> sample_population(
    std::size_t n, const PopulationRanges& ranges, std::uint64_t seed) {
  ranges.validate();
  std::vector<DeviceProfile> population;
  population.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Xoshiro256 rng(mix_seed(seed, detail::kSeedPopulation,
                            static_cast<std::uint64_t>(i)));
    DeviceProfile dev;
    char id[32];
    std::snprintf(id, sizeof(id), "dev-%06zu", i);
    dev.device_id = id;

    dev.audio.gain_db.freqs_hz = ranges.profile_freqs_hz;
    dev.audio.gain_db.values.reserve(ranges.profile_freqs_hz.size());
    for (std::size_t k = 0; k < ranges.profile_freqs_hz.size(); ++k)
      dev.audio.gain_db.values.push_back(
          rng.uniform(-ranges.audio_tolerance_db, ranges.audio_tolerance_db));
    dev.audio.h2 = ranges.h2.sample_in(rng, 0.0, std::nextafter(1.0, 0.0));
    dev.audio.h3 = ranges.h3.sample_in(rng, 0.0, std::nextafter(1.0, 0.0));

    constexpr double kInf = std::numeric_limits<double>::infinity();
    dev.accel.s_x = ranges.s_x.sample_in(rng, std::nextafter(0.0, 1.0), kInf);
    dev.accel.s_y = ranges.s_y.sample_in(rng, std::nextafter(0.0, 1.0), kInf);
    dev.accel.s_z = ranges.s_z.sample_in(rng, std::nextafter(0.0, 1.0), kInf);
    dev.accel.o_x = ranges.o_x.sample(rng);
    dev.accel.o_y = ranges.o_y.sample(rng);
    dev.accel.o_z = ranges.o_z.sample(rng);

    dev.user_agent = detail::pick_user_agent(ranges.user_agents, rng);
    dev.noise = ranges.noise;

    dev.audio.validate();
    dev.accel.validate();
    population.push_back(std::move(dev));
  }
  return population;
}

/// One playback-and-record loop. The recorded fundamental amplitude is
///   A = amplitude * 10^((device_gain(f) + location_gain(f) + e) / 20)
/// with e ~ N(0, location_variance(f)) redrawn per measurement. The device
/// re-emits h2*A at 2f and h3*A at 3f; harmonics at or above Nyquist do not
/// appear in the sampled signal. Additive recorder noise per NoiseSpec.
inline Recording simulate_audio_measurement(const DeviceProfile& device,
                                            const LocationEffect& location,
                                            double freq_hz, double amplitude,
                                            double duration_s,
                                            std::uint64_t seed,
                                            int sample_rate = 8000) {
  device.audio.validate();
  device.noise.validate();
  location.validate();
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be > 0");
  if (!(freq_hz > 0.0) || freq_hz >= sample_rate / 2.0)
    throw std::invalid_argument("tone frequency must lie in (0, Nyquist)");
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (!(amplitude > 0.0)) throw std::invalid_argument("amplitude must be > 0");

  Xoshiro256 gain_rng(mix_seed(seed, detail::kSeedAudioGain, freq_hz));
  double gain_db = device.audio.gain_db.at(freq_hz) + location.gain_db.at(freq_hz);
  const double var_db2 = location.var_db2.at(freq_hz);
  if (var_db2 > 0.0) gain_db += gain_rng.gaussian(0.0, std::sqrt(var_db2));
  const double fundamental = amplitude * std::pow(10.0, gain_db / 20.0);

  struct Component {
    double amp;
    double w;
  };
  std::vector<Component> parts;
  const double base_w = 2.0 * kPi * freq_hz / sample_rate;
  parts.push_back({fundamental, base_w});
  if (device.audio.h2 > 0.0 && 2.0 * freq_hz < sample_rate / 2.0)
    parts.push_back({device.audio.h2 * fundamental, 2.0 * base_w});
  if (device.audio.h3 > 0.0 && 3.0 * freq_hz < sample_rate / 2.0)
    parts.push_back({device.audio.h3 * fundamental, 3.0 * base_w});

  Recording rec;
  rec.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  rec.samples.resize(n);
  Xoshiro256 noise_rng(mix_seed(seed, detail::kSeedAudioNoise, freq_hz));
  const double sigma = device.noise.audio_sigma;
  for (std::size_t k = 0; k < n; ++k) {
    double v = 0.0;
    for (const auto& p : parts) v += p.amp * std::sin(p.w * static_cast<double>(k));
    if (sigma > 0.0) v += noise_rng.gaussian(0.0, sigma);
    rec.samples[k] = v;
  }
  return rec;
}

/// Like simulate_audio_measurement but all base tones play at once into a
/// single recording, each with its own gain draw and harmonic images. This
/// is the capture a spectrum-based extractor works from.
inline Recording simulate_multi_tone_measurement(
    const DeviceProfile& device, const LocationEffect& location,
    const std::vector<double>& freqs_hz, double amplitude, double duration_s,
    std::uint64_t seed, int sample_rate = 8000) {
  device.audio.validate();
  device.noise.validate();
  location.validate();
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be > 0");
  if (freqs_hz.empty()) throw std::invalid_argument("no base frequencies");
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (!(amplitude > 0.0)) throw std::invalid_argument("amplitude must be > 0");

  struct Component {
    double amp;
    double w;
  };
  std::vector<Component> parts;
  for (double f : freqs_hz) {
    if (!(f > 0.0) || f >= sample_rate / 2.0)
      throw std::invalid_argument("tone frequency must lie in (0, Nyquist)");
    Xoshiro256 gain_rng(mix_seed(seed, detail::kSeedAudioGain, f));
    double gain_db = device.audio.gain_db.at(f) + location.gain_db.at(f);
    const double var_db2 = location.var_db2.at(f);
    if (var_db2 > 0.0) gain_db += gain_rng.gaussian(0.0, std::sqrt(var_db2));
    const double fundamental = amplitude * std::pow(10.0, gain_db / 20.0);
    const double base_w = 2.0 * kPi * f / sample_rate;
    parts.push_back({fundamental, base_w});
    if (device.audio.h2 > 0.0 && 2.0 * f < sample_rate / 2.0)
      parts.push_back({device.audio.h2 * fundamental, 2.0 * base_w});
    if (device.audio.h3 > 0.0 && 3.0 * f < sample_rate / 2.0)
      parts.push_back({device.audio.h3 * fundamental, 3.0 * base_w});
  }

  Recording rec;
  rec.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  rec.samples.resize(n);
  Xoshiro256 noise_rng(mix_seed(seed, detail::kSeedAudioNoise));
  const double sigma = device.noise.audio_sigma;
  for (std::size_t k = 0; k < n; ++k) {
    double v = 0.0;
    for (const auto& p : parts) v += p.amp * std::sin(p.w * static_cast<double>(k));
    if (sigma > 0.0) v += noise_rng.gaussian(0.0, sigma);
    rec.samples[k] = v;
  }
  return rec;
}

/// Accelerometer capture of a motionless device: per axis, the gravity
/// reaction through the linear bias model, plus Gaussian noise, optionally
/// quantized. Noise draws go x, y, z within each sample.
inline std::vector<AccelSample> simulate_rest_stream(
    const DeviceProfile& device, const Orientation& orientation,
    double duration_s, double rate_hz, std::uint64_t seed) {
  device.accel.validate();
  device.noise.validate();
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (!(rate_hz > 0.0)) throw std::invalid_argument("rate must be > 0");

  const Vec3 gravity = orientation.gravity_in_device_frame();
  const auto n = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
  Xoshiro256 rng(mix_seed(seed, detail::kSeedRestNoise));
  const double sigma = device.noise.accel_sigma;
  const double step = device.noise.quantization_step;
  const auto measure = [&](double truth, double s, double o) {
    double v = truth * s + o;
    if (sigma > 0.0) v += rng.gaussian(0.0, sigma);
    if (step > 0.0) v = std::round(v / step) * step;
    return v;
  };

  std::vector<AccelSample> stream;
  stream.reserve(n);
  const auto& c = device.accel;
  for (std::size_t k = 0; k < n; ++k) {
    AccelSample s;
    s.t = static_cast<double>(k) / rate_hz;
    s.x = measure(gravity.x, c.s_x, c.o_x);
    s.y = measure(gravity.y, c.s_y, c.o_y);
    s.z = measure(gravity.z, c.s_z, c.o_z);
    stream.push_back(s);
  }
  return stream;
}

/// How many devices submit once, twice, three times... Weights are relative
/// proportions of the population.
struct MultiplicityWeight {
  std::size_t submissions = 1;
  double weight = 1.0;
};

/// Dataset-generation recipe for simulate_submission_set. Each submission
/// runs a face-up and a face-down rest capture through the Z-axis estimator.
struct SubmissionPlan {
  std::vector<MultiplicityWeight> multiplicities = {{2, 1.0}};
  double rest_duration_s = 1.0;
  double rest_rate_hz = 100.0;
  RestDetectionConfig rest;

  void validate() const {
    if (multiplicities.empty())
      throw std::invalid_argument("no submission multiplicities configured");
    for (const auto& m : multiplicities) {
      if (m.submissions == 0)
        throw std::invalid_argument("submission count must be >= 1");
      if (!(m.weight > 0.0) || !std::isfinite(m.weight))
        throw std::invalid_argument("multiplicity weights must be positive");
    }
    if (!(rest_duration_s > 0.0) || !(rest_rate_hz > 0.0))
      throw std::invalid_argument("rest capture duration and rate must be > 0");
  }
};

namespace detail {

/// Largest-remainder apportionment of n devices over the weight table,
/// then a seeded shuffle. Counts per multiplicity are exact for every n.
inline std::vector<std::size_t> assign_multiplicities(
    std::size_t n, const std::vector<MultiplicityWeight>& weights,
    std::uint64_t seed) {
  double total = 0.0;
  for (const auto& m : weights) total += m.weight;
  std::vector<std::size_t> counts(weights.size());
  std::vector<double> fractions(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(n) * weights[i].weight / total;
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    fractions[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fractions[a] > fractions[b];
  });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned)
    ++counts[order[r % order.size()]];

  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < weights.size(); ++i)
    out.insert(out.end(), counts[i], weights[i].submissions);
  Xoshiro256 rng(mix_seed(seed, kSeedMultiplicity));
  for (std::size_t i = out.size(); i > 1; --i) {
    const std::size_t j = rng.next_u64() % i;
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

}  // namespace detail

/// Simulates a submission dataset: every device contributes its assigned
/// number of fingerprints, each estimated from fresh noisy face-up and
/// face-down captures. The cookie id is the device id; timestamps order a
/// device's submissions (first = enrollment).
inline std::vector<Submission> simulate_submission_set(
    std::span<const DeviceProfile> population, const SubmissionPlan& plan,
    std::uint64_t seed) {
  if (population.empty()) throw std::invalid_argument("empty population");
  plan.validate();
  const auto multiplicity =
      detail::assign_multiplicities(population.size(), plan.multiplicities, seed);

  std::vector<Submission> out;
  for (std::size_t i = 0; i < population.size(); ++i) {
    const auto& dev = population[i];
    for (std::size_t j = 0; j < multiplicity[i]; ++j) {
      const auto up = simulate_rest_stream(
          dev, Orientation::face_up(), plan.rest_duration_s, plan.rest_rate_hz,
          mix_seed(seed, detail::kSeedSubmission,
                   static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j),
                   std::uint64_t{0}));
      const auto down = simulate_rest_stream(
          dev, Orientation::face_down(), plan.rest_duration_s, plan.rest_rate_hz,
          mix_seed(seed, detail::kSeedSubmission,
                   static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j),
                   std::uint64_t{1}));
      Submission sub;
      sub.cookie_id = dev.device_id;
      sub.user_agent = dev.user_agent;
      sub.fingerprint = z_axis_from_updown_streams(up, down, plan.rest);
      sub.timestamp = static_cast<std::int64_t>(i) * 1000 +
                      static_cast<std::int64_t>(j);
      out.push_back(std::move(sub));
    }
  }
  return out;
}

}  // namespace sensorprint
