#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sensorprint/accel_fingerprint.hpp"
#include "sensorprint/audio_fingerprint.hpp"
#include "sensorprint/classification.hpp"
#include "sensorprint/dataset.hpp"
#include "sensorprint/device_model.hpp"
#include "sensorprint/entropy_analysis.hpp"
#include "sensorprint/rng.hpp"
#include "sensorprint/sensor_types.hpp"

namespace sensorprint {

namespace detail {

inline constexpr std::uint64_t kSeedLocation = 8;
inline constexpr std::uint64_t kSeedMeasurement = 9;

}  // namespace detail

/// Random-location generator settings: each location gets a per-frequency
/// gain shift uniform in ±gain_db and a per-frequency excess variance drawn
/// log-uniformly from [var_db2_min, var_db2_max]. The variance spread is
/// what makes some frequencies far less reliable than others.
struct LocationModel {
  double gain_db = 2.0;
  double var_db2_min = 0.01;
  double var_db2_max = 1.0;

  void validate() const {
    if (!(gain_db >= 0.0))
      throw std::invalid_argument("location gain range must be >= 0");
    if (!(var_db2_min >= 0.0) || !(var_db2_max >= var_db2_min))
      throw std::invalid_argument("location variance range is invalid");
  }
};

inline std::vector<LocationEffect> make_locations(
    const std::vector<double>& freqs_hz, std::size_t count,
    const LocationModel& model, std::uint64_t seed) {
  model.validate();
  std::vector<LocationEffect> locations;
  locations.reserve(count);
  for (std::size_t l = 0; l < count; ++l) {
    Xoshiro256 rng(mix_seed(seed, detail::kSeedLocation,
                            static_cast<std::uint64_t>(l)));
    LocationEffect loc;
    loc.gain_db.freqs_hz = freqs_hz;
    loc.var_db2.freqs_hz = freqs_hz;
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
      loc.gain_db.values.push_back(rng.uniform(-model.gain_db, model.gain_db));
      double v = 0.0;
      if (model.var_db2_max > 0.0) {
        const double lo = std::max(model.var_db2_min, 1e-12);
        v = lo * std::pow(model.var_db2_max / lo, rng.uniform01());
      }
      loc.var_db2.values.push_back(v);
    }
    locations.push_back(std::move(loc));
  }
  return locations;
}

/// Swept fingerprint of one device at one location: one playback-and-record
/// loop per plan frequency, all derived from the same measurement seed.
inline AudioFingerprint measure_sweep_fingerprint(
    const DeviceProfile& device, const LocationEffect& location,
    const FrequencyPlan& plan, double amplitude, double duration_s,
    std::uint64_t seed) {
  return sweep_fingerprint(
      [&](double f) {
        return simulate_audio_measurement(device, location, f, amplitude,
                                          duration_s, seed, plan.sample_rate);
      },
      plan, amplitude);
}

/// Stealth fingerprint of one device: all base tones in one capture, then
/// spectrum extraction of their second and third harmonics.
inline AudioFingerprint measure_stealth_fingerprint(
    const DeviceProfile& device, const LocationEffect& location,
    const std::vector<double>& base_freqs_hz, double amplitude,
    double duration_s, std::uint64_t seed, int sample_rate = 8000) {
  const Recording rec = simulate_multi_tone_measurement(
      device, location, base_freqs_hz, amplitude, duration_s, seed, sample_rate);
  AudioFingerprint fp = stealth_fingerprint(rec, base_freqs_hz);
  AudioFingerprint normalized;
  for (const auto& [key, value] : fp.entries())
    normalized.set(key.first, key.second, value / amplitude);
  return normalized;
}

/// One experiment recipe, parsed from a JSON config document. The kind
/// selects the pipeline; the remaining fields configure it and carry
/// kind-appropriate defaults.
struct ExperimentConfig {
  std::string kind;
  std::optional<std::uint64_t> seed;

  std::size_t devices = 0;
  PopulationRanges population;

  FrequencyPlan plan = FrequencyPlan::seven_tone();
  std::size_t locations = 3;
  std::size_t runs_per_location = 4;
  double amplitude = 1.0;
  double duration_s = 1.0;
  LocationModel location_model;

  std::vector<double> base_freqs_hz = {460.0, 740.0, 1060.0};
  std::size_t reps_per_device = 4;
  std::size_t folds = 10;
  std::size_t knn_k = 1;

  SubmissionPlan submission_plan;
  std::size_t two_submission_devices = 500;
  std::size_t one_submission_devices = 500;
  ScaledDistanceConfig distance;
  std::vector<double> m_sz_sweep = {1.0, 10.0, 100.0, 300.0, 1000.0, 10000.0};
  std::optional<double> filter_percentile = 95.0;
  double grid_o_width = 0.045;
  double grid_s_width = 0.0037;
  std::vector<double> origin_fractions = {0.0, 0.25, 0.5, 0.75};

  std::string dataset_path;
  std::string method = "knn";
  DistanceVariant variant = DistanceVariant::second_harmonic;
};

namespace detail {

/// Tracks which keys of one JSON object were consumed and reports the rest
/// as unknown. Parse problems accumulate in `errors` so a bad config is
/// reported in full rather than one complaint at a time.
class KeyScope {
 public:
  KeyScope(const json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {}

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() {
    for (const auto& [key, value] : obj_.items())
      if (seen_.find(key) == seen_.end())
        errors_.push_back(path_ + ": unknown key '" + key + "'");
  }

  void error(const std::string& key, const std::string& msg) {
    errors_.push_back(path_ + "." + key + ": " + msg);
  }

  const std::string& path() const { return path_; }
  std::vector<std::string>& errors() { return errors_; }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline void read_double(KeyScope& scope, const std::string& key, double& out) {
  const json* v = scope.get(key);
  if (!v) return;
  if (!v->is_number()) {
    scope.error(key, "expected a number");
    return;
  }
  out = v->get<double>();
}

inline void read_size(KeyScope& scope, const std::string& key, std::size_t& out) {
  const json* v = scope.get(key);
  if (!v) return;
  if (!v->is_number_unsigned()) {
    scope.error(key, "expected a non-negative integer");
    return;
  }
  out = v->get<std::size_t>();
}

inline void read_double_array(KeyScope& scope, const std::string& key,
                              std::vector<double>& out) {
  const json* v = scope.get(key);
  if (!v) return;
  if (!v->is_array() || v->empty()) {
    scope.error(key, "expected a non-empty array of numbers");
    return;
  }
  std::vector<double> values;
  for (const auto& e : *v) {
    if (!e.is_number()) {
      scope.error(key, "expected a non-empty array of numbers");
      return;
    }
    values.push_back(e.get<double>());
  }
  out = std::move(values);
}

/// Distribution spec: [lo, hi] means uniform; {"gaussian": [mean, sigma]}
/// and {"uniform": [lo, hi]} spell the shape out.
inline void read_dist(KeyScope& scope, const std::string& key, ParamDist& out) {
  const json* v = scope.get(key);
  if (!v) return;
  const auto from_pair = [&](const json& pair,
                             ParamDist::Kind kind) -> std::optional<ParamDist> {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
        !pair[1].is_number())
      return std::nullopt;
    return ParamDist{kind, pair[0].get<double>(), pair[1].get<double>()};
  };
  std::optional<ParamDist> parsed;
  if (v->is_array()) {
    parsed = from_pair(*v, ParamDist::Kind::uniform);
  } else if (v->is_object() && v->size() == 1) {
    if (v->contains("uniform"))
      parsed = from_pair((*v)["uniform"], ParamDist::Kind::uniform);
    else if (v->contains("gaussian"))
      parsed = from_pair((*v)["gaussian"], ParamDist::Kind::gaussian);
  }
  if (!parsed) {
    scope.error(key,
                "expected [lo, hi] or {\"uniform\"|\"gaussian\": [a, b]}");
    return;
  }
  out = *parsed;
}

inline void read_noise(KeyScope& parent, const std::string& key, NoiseSpec& out) {
  const json* v = parent.get(key);
  if (!v) return;
  if (!v->is_object()) {
    parent.error(key, "expected an object");
    return;
  }
  KeyScope scope(*v, parent.path() + "." + key, parent.errors());
  read_double(scope, "audio_sigma", out.audio_sigma);
  read_double(scope, "accel_sigma", out.accel_sigma);
  read_double(scope, "quantization_step", out.quantization_step);
  scope.finish();
}

inline void read_population(KeyScope& parent, PopulationRanges& out) {
  const json* v = parent.get("population");
  if (!v) return;
  if (!v->is_object()) {
    parent.error("population", "expected an object");
    return;
  }
  KeyScope scope(*v, parent.path() + ".population", parent.errors());
  read_dist(scope, "s_x", out.s_x);
  read_dist(scope, "s_y", out.s_y);
  read_dist(scope, "s_z", out.s_z);
  read_dist(scope, "o_x", out.o_x);
  read_dist(scope, "o_y", out.o_y);
  read_dist(scope, "o_z", out.o_z);
  read_dist(scope, "h2", out.h2);
  read_dist(scope, "h3", out.h3);
  read_double(scope, "audio_tolerance_db", out.audio_tolerance_db);
  std::size_t catalog_size = 0;
  read_size(scope, "ua_catalog_size", catalog_size);
  if (catalog_size > 0) out.user_agents = make_synthetic_ua_catalog(catalog_size);
  if (const json* uas = scope.get("user_agents")) {
    if (!uas->is_array() || uas->empty()) {
      scope.error("user_agents", "expected a non-empty array");
    } else {
      std::vector<UserAgentEntry> catalog;
      bool ok = true;
      for (const auto& e : *uas) {
        if (!e.is_object() || !e.contains("ua") || !e["ua"].is_string() ||
            (e.contains("weight") && !e["weight"].is_number())) {
          scope.error("user_agents", "entries need {\"ua\": str, \"weight\"?: num}");
          ok = false;
          break;
        }
        for (const auto& [k, unused] : e.items())
          if (k != "ua" && k != "weight") {
            scope.error("user_agents", "unknown entry key '" + k + "'");
            ok = false;
          }
        if (!ok) break;
        catalog.push_back({e["ua"].get<std::string>(),
                           e.contains("weight") ? e["weight"].get<double>() : 1.0});
      }
      if (ok) out.user_agents = std::move(catalog);
    }
  }
  read_noise(scope, "noise", out.noise);
  scope.finish();
}

inline void read_plan(KeyScope& parent, FrequencyPlan& out) {
  const json* v = parent.get("plan");
  if (!v) return;
  if (v->is_string()) {
    const std::string name = v->get<std::string>();
    if (name == "seven-tone")
      out = FrequencyPlan::seven_tone();
    else if (name == "thirteen-tone")
      out = FrequencyPlan::thirteen_tone();
    else
      parent.error("plan", "unknown plan name '" + name + "'");
    return;
  }
  if (!v->is_object()) {
    parent.error("plan", "expected a plan name or an object");
    return;
  }
  KeyScope scope(*v, parent.path() + ".plan", parent.errors());
  read_double_array(scope, "frequencies_hz", out.frequencies_hz);
  if (const json* h = scope.get("harmonics")) {
    if (!h->is_array() || h->empty()) {
      scope.error("harmonics", "expected a non-empty integer array");
    } else {
      std::vector<int> harmonics;
      bool ok = true;
      for (const auto& e : *h) {
        if (!e.is_number_integer()) {
          scope.error("harmonics", "expected a non-empty integer array");
          ok = false;
          break;
        }
        harmonics.push_back(e.get<int>());
      }
      if (ok) out.harmonics = std::move(harmonics);
    }
  }
  std::size_t rate = static_cast<std::size_t>(out.sample_rate);
  read_size(scope, "sample_rate", rate);
  out.sample_rate = static_cast<int>(rate);
  scope.finish();
}

inline void read_rest(KeyScope& parent, SubmissionPlan& out) {
  const json* v = parent.get("rest");
  if (!v) return;
  if (!v->is_object()) {
    parent.error("rest", "expected an object");
    return;
  }
  KeyScope scope(*v, parent.path() + ".rest", parent.errors());
  read_double(scope, "duration_s", out.rest_duration_s);
  read_double(scope, "rate_hz", out.rest_rate_hz);
  read_double(scope, "magnitude_tol", out.rest.magnitude_tol);
  read_double(scope, "variance_tol", out.rest.variance_tol);
  read_size(scope, "min_samples", out.rest.min_samples);
  read_double(scope, "dominance", out.rest.dominance);
  scope.finish();
}

inline void read_multiplicities(KeyScope& parent, SubmissionPlan& out) {
  const json* v = parent.get("submissions");
  if (!v) return;
  if (!v->is_array() || v->empty()) {
    parent.error("submissions", "expected a non-empty array");
    return;
  }
  std::vector<MultiplicityWeight> weights;
  for (const auto& e : *v) {
    if (!e.is_object() || !e.contains("count") || !e.contains("weight") ||
        !e["count"].is_number_unsigned() || !e["weight"].is_number() ||
        e.size() != 2) {
      parent.error("submissions", "entries need {\"count\": uint, \"weight\": num}");
      return;
    }
    weights.push_back({e["count"].get<std::size_t>(), e["weight"].get<double>()});
  }
  out.multiplicities = std::move(weights);
}

}  // namespace detail

/// Parses and checks one JSON config document. Every problem found is
/// reported in a single exception message, one line each.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  if (!doc.is_object()) {
    throw std::invalid_argument("config: document must be a JSON object");
  }
  detail::KeyScope scope(doc, "config", errors);

  if (const nlohmann::json* kind = scope.get("kind")) {
    if (kind->is_string())
      cfg.kind = kind->get<std::string>();
    else
      scope.error("kind", "expected a string");
  } else {
    errors.push_back("config: missing key 'kind'");
  }

  static const std::set<std::string> kKinds = {
      "simulate",    "audio-l2",   "audio-mle",        "audio-stealth",
      "accel-sweep", "accel-recognition", "entropy",   "classify"};
  if (!cfg.kind.empty() && kKinds.find(cfg.kind) == kKinds.end())
    scope.error("kind", "unknown experiment kind '" + cfg.kind + "'");

  // Kind-specific defaults, applied before the overrides are read.
  if (cfg.kind == "audio-l2") {
    cfg.devices = 16;
    cfg.plan = FrequencyPlan::seven_tone();
  } else if (cfg.kind == "audio-mle") {
    cfg.devices = 15;
    cfg.plan = FrequencyPlan::thirteen_tone();
  } else if (cfg.kind == "audio-stealth") {
    cfg.devices = 17;
    cfg.locations = 1;
  } else if (cfg.kind == "accel-sweep") {
    cfg.devices = 33;
    cfg.population.noise.accel_sigma = 0.2296;
    cfg.submission_plan.rest.magnitude_tol = 2.5;
    cfg.submission_plan.rest.variance_tol = 0.25;
  } else if (cfg.kind == "accel-recognition") {
    cfg.population.user_agents = make_synthetic_ua_catalog(30);
    cfg.population.noise.accel_sigma = 0.2296;
    cfg.submission_plan.rest.magnitude_tol = 2.5;
    cfg.submission_plan.rest.variance_tol = 0.25;
  } else if (cfg.kind == "simulate") {
    cfg.devices = 100;
  }

  if (const nlohmann::json* seed = scope.get("seed")) {
    if (seed->is_number_unsigned())
      cfg.seed = seed->get<std::uint64_t>();
    else
      scope.error("seed", "expected a non-negative integer");
  }

  const auto has = [&](std::initializer_list<const char*> kinds) {
    for (const char* k : kinds)
      if (cfg.kind == k) return true;
    return false;
  };

  if (has({"simulate", "audio-l2", "audio-mle", "audio-stealth", "accel-sweep"}))
    detail::read_size(scope, "devices", cfg.devices);
  detail::read_population(scope, cfg.population);

  if (has({"audio-l2", "audio-mle"})) {
    detail::read_plan(scope, cfg.plan);
    detail::read_size(scope, "locations", cfg.locations);
  }
  if (has({"audio-l2", "audio-mle", "audio-stealth"})) {
    detail::read_double(scope, "amplitude", cfg.amplitude);
    detail::read_double(scope, "duration_s", cfg.duration_s);
    detail::read_double(scope, "location_gain_db", cfg.location_model.gain_db);
    detail::read_double(scope, "var_db2_min", cfg.location_model.var_db2_min);
    detail::read_double(scope, "var_db2_max", cfg.location_model.var_db2_max);
  }
  if (has({"audio-mle"}))
    detail::read_size(scope, "runs_per_location", cfg.runs_per_location);
  if (has({"audio-stealth"})) {
    detail::read_double_array(scope, "base_freqs_hz", cfg.base_freqs_hz);
    detail::read_size(scope, "reps_per_device", cfg.reps_per_device);
    detail::read_size(scope, "folds", cfg.folds);
    detail::read_size(scope, "k", cfg.knn_k);
  }
  if (has({"simulate"})) detail::read_multiplicities(scope, cfg.submission_plan);
  if (has({"simulate", "accel-sweep", "accel-recognition"}))
    detail::read_rest(scope, cfg.submission_plan);
  if (has({"accel-sweep"}))
    detail::read_double_array(scope, "m_sz_sweep", cfg.m_sz_sweep);
  if (has({"accel-recognition"})) {
    detail::read_size(scope, "two_submission_devices", cfg.two_submission_devices);
    detail::read_size(scope, "one_submission_devices", cfg.one_submission_devices);
    detail::read_double(scope, "m_sz", cfg.distance.m_sz);
    double pct = *cfg.filter_percentile;
    detail::read_double(scope, "filter_percentile", pct);
    cfg.filter_percentile = pct;
  }
  if (has({"accel-recognition", "entropy"})) {
    detail::read_double(scope, "grid_o_width", cfg.grid_o_width);
    detail::read_double(scope, "grid_s_width", cfg.grid_s_width);
    detail::read_double_array(scope, "origin_fractions", cfg.origin_fractions);
  }
  if (has({"entropy", "classify"})) {
    if (const nlohmann::json* ds = scope.get("dataset")) {
      if (ds->is_string())
        cfg.dataset_path = ds->get<std::string>();
      else
        scope.error("dataset", "expected a path string");
    } else {
      errors.push_back("config: missing key 'dataset'");
    }
  }
  if (has({"classify"})) {
    if (const nlohmann::json* m = scope.get("method")) {
      if (m->is_string())
        cfg.method = m->get<std::string>();
      else
        scope.error("method", "expected a string");
    }
    if (const nlohmann::json* v = scope.get("variant")) {
      bool matched = false;
      if (v->is_string()) {
        const std::string name = v->get<std::string>();
        for (DistanceVariant candidate :
             {DistanceVariant::first_harmonic, DistanceVariant::second_harmonic,
              DistanceVariant::second_harmonic_d1,
              DistanceVariant::second_harmonic_d2})
          if (name == variant_name(candidate)) {
            cfg.variant = candidate;
            matched = true;
          }
      }
      if (!matched) scope.error("variant", "unknown feature variant");
    }
    detail::read_size(scope, "folds", cfg.folds);
    detail::read_size(scope, "k", cfg.knn_k);
  }
  scope.finish();

  // Semantic checks on the assembled config, collected alongside key errors.
  const auto guard = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      errors.push_back(std::string("config: ") + what + ": " + e.what());
    }
  };
  if (errors.empty()) {
    guard("population", [&] { cfg.population.validate(); });
    if (has({"audio-l2", "audio-mle"})) guard("plan", [&] { cfg.plan.validate(); });
    if (has({"audio-l2", "audio-mle", "audio-stealth"})) {
      guard("location model", [&] { cfg.location_model.validate(); });
      if (!(cfg.amplitude > 0.0))
        errors.push_back("config.amplitude: must be > 0");
      if (!(cfg.duration_s > 0.0))
        errors.push_back("config.duration_s: must be > 0");
    }
    if (has({"audio-l2", "audio-mle"}) && cfg.locations < 2)
      errors.push_back("config.locations: need at least 2");
    if (has({"audio-mle"}) && cfg.runs_per_location < 2)
      errors.push_back("config.runs_per_location: need at least 2");
    if (has({"audio-stealth"})) {
      if (cfg.folds < 2) errors.push_back("config.folds: need at least 2");
      if (cfg.knn_k < 1) errors.push_back("config.k: must be >= 1");
      if (cfg.reps_per_device < 2)
        errors.push_back("config.reps_per_device: need at least 2");
    }
    if (has({"simulate", "accel-sweep", "accel-recognition"}))
      guard("submission plan", [&] { cfg.submission_plan.validate(); });
    if (has({"accel-recognition"})) {
      if (cfg.two_submission_devices == 0)
        errors.push_back("config.two_submission_devices: must be >= 1");
      guard("distance", [&] { cfg.distance.validate(); });
      if (!(*cfg.filter_percentile > 0.0) || *cfg.filter_percentile > 100.0)
        errors.push_back("config.filter_percentile: must lie in (0, 100]");
      if (!(cfg.grid_o_width > 0.0) || !(cfg.grid_s_width > 0.0))
        errors.push_back("config.grid widths: must be > 0");
    }
    if (has({"accel-sweep"})) {
      for (double m : cfg.m_sz_sweep)
        if (!(m >= 0.0)) {
          errors.push_back("config.m_sz_sweep: values must be >= 0");
          break;
        }
    }
    if (has({"simulate", "audio-l2", "audio-mle", "audio-stealth",
             "accel-sweep"}) &&
        cfg.devices == 0)
      errors.push_back("config.devices: must be >= 1");
    if (has({"entropy"}) && (!(cfg.grid_o_width > 0.0) || !(cfg.grid_s_width > 0.0)))
      errors.push_back("config.grid widths: must be > 0");
    if (has({"classify"})) {
      if (cfg.method != "l2" && cfg.method != "knn" && cfg.method != "mle")
        errors.push_back("config.method: expected 'l2', 'knn', or 'mle'");
      if (cfg.folds < 2) errors.push_back("config.folds: need at least 2");
      if (cfg.knn_k < 1) errors.push_back("config.k: must be >= 1");
    }
  }

  if (!errors.empty()) {
    std::string joined = "invalid config:";
    for (const auto& e : errors) joined += "\n  " + e;
    throw std::invalid_argument(joined);
  }
  return cfg;
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                e.what());
  }
  return parse_experiment_config(doc);
}

/// Experiment output: ordered preformatted scalar facts plus one table.
/// Everything is already a string so report emission is byte-stable by
/// construction.
struct ExperimentResult {
  std::string kind;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> info;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  Dataset dataset;  // populated by the simulate kind
};

namespace detail {

inline std::string fmt_bits(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string fmt_count(std::size_t v) { return std::to_string(v); }

}  // namespace detail

namespace detail {

struct AudioRun {
  std::vector<DeviceProfile> devices;
  std::vector<LocationEffect> locations;
  // fingerprints[d][l][r]
  std::vector<std::vector<std::vector<AudioFingerprint>>> fingerprints;
};

inline AudioRun run_audio_measurements(const ExperimentConfig& cfg,
                                       std::uint64_t seed, std::size_t runs) {
  AudioRun run;
  run.devices = sample_population(cfg.devices, cfg.population, seed);
  run.locations = make_locations(cfg.plan.frequencies_hz, cfg.locations,
                                 cfg.location_model, seed);
  run.fingerprints.resize(run.devices.size());
  for (std::size_t d = 0; d < run.devices.size(); ++d) {
    run.fingerprints[d].resize(run.locations.size());
    for (std::size_t l = 0; l < run.locations.size(); ++l) {
      for (std::size_t r = 0; r < runs; ++r) {
        const std::uint64_t mseed =
            mix_seed(seed, kSeedMeasurement, static_cast<std::uint64_t>(d),
                     static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(r));
        run.fingerprints[d][l].push_back(measure_sweep_fingerprint(
            run.devices[d], run.locations[l], cfg.plan, cfg.amplitude,
            cfg.duration_s, mseed));
      }
    }
  }
  return run;
}

inline ExperimentResult run_audio_l2(const ExperimentConfig& cfg,
                                     std::uint64_t seed) {
  const AudioRun run = run_audio_measurements(cfg, seed, 1);
  ExperimentResult result;
  result.info.emplace_back("devices", fmt_count(cfg.devices));
  result.info.emplace_back("locations", fmt_count(cfg.locations));
  result.info.emplace_back("training_location", "1");
  result.columns = {"test_location", "variant", "correct", "total", "accuracy"};

  const DistanceVariant variants[] = {
      DistanceVariant::first_harmonic, DistanceVariant::second_harmonic,
      DistanceVariant::second_harmonic_d1, DistanceVariant::second_harmonic_d2};
  for (std::size_t l = 1; l < run.locations.size(); ++l) {
    for (DistanceVariant variant : variants) {
      FingerprintDb db;
      for (std::size_t d = 0; d < run.devices.size(); ++d)
        db.add(run.devices[d].device_id,
               extract_features(run.fingerprints[d][0][0], variant));
      std::size_t correct = 0;
      for (std::size_t d = 0; d < run.devices.size(); ++d) {
        const auto probe = extract_features(run.fingerprints[d][l][0], variant);
        if (l2_classify(db, probe) == run.devices[d].device_id) ++correct;
      }
      result.rows.push_back({fmt_count(l + 1), variant_name(variant),
                             fmt_count(correct), fmt_count(run.devices.size()),
                             dump_double(static_cast<double>(correct) /
                                         static_cast<double>(run.devices.size()))});
    }
  }
  return result;
}

inline ExperimentResult run_audio_mle(const ExperimentConfig& cfg,
                                      std::uint64_t seed) {
  const AudioRun run = run_audio_measurements(cfg, seed, cfg.runs_per_location);
  ExperimentResult result;
  result.info.emplace_back("devices", fmt_count(cfg.devices));
  result.info.emplace_back("locations", fmt_count(cfg.locations));
  result.info.emplace_back("runs_per_location", fmt_count(cfg.runs_per_location));
  result.columns = {"training", "test_location", "features", "correct", "total",
                    "accuracy"};

  const auto features = [&](std::size_t d, std::size_t l, std::size_t r,
                            int harmonic) {
    return run.fingerprints[d][l][r].harmonic_series(harmonic);
  };

  // Two training regimes: every location, then all but the last.
  const struct Block {
    const char* name;
    std::size_t train_locations;
  } blocks[] = {{"all-locations", cfg.locations},
                {"omit-last", cfg.locations - 1}};
  for (const auto& block : blocks) {
    for (int harmonic : {1, 2}) {
      std::map<std::string, std::vector<std::vector<double>>> training;
      for (std::size_t d = 0; d < run.devices.size(); ++d)
        for (std::size_t l = 0; l < block.train_locations; ++l)
          for (std::size_t r = 0; r < cfg.runs_per_location; ++r)
            training[run.devices[d].device_id].push_back(features(d, l, r, harmonic));
      const MleModel model = mle_fit(training);
      for (std::size_t l = 0; l < run.locations.size(); ++l) {
        std::size_t correct = 0, total = 0;
        for (std::size_t d = 0; d < run.devices.size(); ++d)
          for (std::size_t r = 0; r < cfg.runs_per_location; ++r) {
            ++total;
            if (mle_classify(model, features(d, l, r, harmonic)) ==
                run.devices[d].device_id)
              ++correct;
          }
        result.rows.push_back(
            {block.name, fmt_count(l + 1),
             harmonic == 1 ? "main" : "second-harmonic", fmt_count(correct),
             fmt_count(total),
             dump_double(static_cast<double>(correct) /
                         static_cast<double>(total))});
      }
    }
  }
  return result;
}

inline ExperimentResult run_audio_stealth(const ExperimentConfig& cfg,
                                          std::uint64_t seed) {
  const std::vector<DeviceProfile> devices =
      sample_population(cfg.devices, cfg.population, seed);
  const std::vector<LocationEffect> locations = make_locations(
      cfg.base_freqs_hz, 1, cfg.location_model, seed);
  const LocationEffect& location = locations.front();

  FrequencyPlan sweep_plan;
  sweep_plan.frequencies_hz = cfg.base_freqs_hz;
  sweep_plan.harmonics = {2, 3};
  sweep_plan.sample_rate = 8000;
  sweep_plan.validate();

  const auto flatten = [](const AudioFingerprint& fp) {
    std::vector<double> features;
    for (const auto& [key, value] : fp.entries()) features.push_back(value);
    return features;
  };

  std::vector<LabeledPoint> stealth_points, sweep_points;
  for (std::size_t d = 0; d < devices.size(); ++d) {
    for (std::size_t r = 0; r < cfg.reps_per_device; ++r) {
      const std::uint64_t mseed =
          mix_seed(seed, kSeedMeasurement, static_cast<std::uint64_t>(d),
                   static_cast<std::uint64_t>(r));
      stealth_points.push_back(
          {flatten(measure_stealth_fingerprint(devices[d], location,
                                               cfg.base_freqs_hz, cfg.amplitude,
                                               cfg.duration_s, mseed)),
           devices[d].device_id});
      sweep_points.push_back(
          {flatten(measure_sweep_fingerprint(devices[d], location, sweep_plan,
                                             cfg.amplitude, cfg.duration_s,
                                             mseed)),
           devices[d].device_id});
    }
  }

  const KfoldResult stealth_cv = kfold_accuracy(
      std::span<const LabeledPoint>(stealth_points), cfg.folds,
      knn_classifier(cfg.knn_k), seed);
  const KfoldResult sweep_cv = kfold_accuracy(
      std::span<const LabeledPoint>(sweep_points), cfg.folds,
      knn_classifier(cfg.knn_k), seed);

  // Method agreement on a noise-free twin of the same population.
  std::vector<DeviceProfile> quiet = devices;
  for (auto& dev : quiet) dev.noise = NoiseSpec{};
  LocationEffect flat;
  double max_disagreement = 0.0;
  for (const auto& dev : quiet) {
    const auto st = measure_stealth_fingerprint(
        dev, flat, cfg.base_freqs_hz, cfg.amplitude, cfg.duration_s, seed);
    const auto sw = measure_sweep_fingerprint(dev, flat, sweep_plan,
                                              cfg.amplitude, cfg.duration_s,
                                              seed);
    for (const auto& [key, value] : st.entries())
      max_disagreement =
          std::max(max_disagreement, std::abs(value - sw.at(key.first, key.second)));
  }

  ExperimentResult result;
  result.info.emplace_back("devices", fmt_count(cfg.devices));
  result.info.emplace_back("reps_per_device", fmt_count(cfg.reps_per_device));
  result.info.emplace_back("folds", fmt_count(cfg.folds));
  result.info.emplace_back("k", fmt_count(cfg.knn_k));
  result.info.emplace_back("noiseless_method_disagreement",
                           dump_double(max_disagreement));
  result.columns = {"method", "accuracy", "small_class_warning"};
  result.rows.push_back({"single-tone-sweep", dump_double(sweep_cv.accuracy),
                         sweep_cv.small_class_warning ? "yes" : "no"});
  result.rows.push_back({"stealth-multi-tone", dump_double(stealth_cv.accuracy),
                         stealth_cv.small_class_warning ? "yes" : "no"});
  return result;
}

inline ExperimentResult run_accel_sweep(const ExperimentConfig& cfg,
                                        std::uint64_t seed) {
  const std::vector<DeviceProfile> devices =
      sample_population(cfg.devices, cfg.population, seed);
  SubmissionPlan plan = cfg.submission_plan;
  plan.multiplicities = {{2, 1.0}};
  const std::vector<Submission> subs =
      simulate_submission_set(devices, plan, seed);

  ExperimentResult result;
  result.info.emplace_back("devices", fmt_count(cfg.devices));
  result.info.emplace_back("submissions", fmt_count(subs.size()));
  const auto dists = intra_device_distances(subs);
  result.info.emplace_back("delta_o_p95",
                           dump_double(percentile_nearest_rank(dists.d_o, 95.0)));
  result.info.emplace_back("delta_s_p95",
                           dump_double(percentile_nearest_rank(dists.d_s, 95.0)));
  result.columns = {"m_sz", "evaluated", "correct", "recognition_rate"};
  for (double m : cfg.m_sz_sweep) {
    RecognitionOptions options;
    options.distance.m_sz = m;
    const RecognitionOutcome outcome = recognition_rate(subs, options);
    result.rows.push_back({dump_double(m), fmt_count(outcome.evaluated),
                           fmt_count(outcome.correct),
                           dump_double(outcome.fraction)});
  }
  return result;
}

inline ExperimentResult run_accel_recognition(const ExperimentConfig& cfg,
                                              std::uint64_t seed) {
  const std::size_t total =
      cfg.two_submission_devices + cfg.one_submission_devices;
  const std::vector<DeviceProfile> devices =
      sample_population(total, cfg.population, seed);
  SubmissionPlan plan = cfg.submission_plan;
  plan.multiplicities = {
      {2, static_cast<double>(cfg.two_submission_devices)},
      {1, static_cast<double>(cfg.one_submission_devices)}};
  if (cfg.one_submission_devices == 0) plan.multiplicities.pop_back();
  const std::vector<Submission> subs =
      simulate_submission_set(devices, plan, seed);

  RecognitionOptions plain;
  plain.distance = cfg.distance;
  RecognitionOptions filtered = plain;
  filtered.filter_percentile = cfg.filter_percentile;

  const RecognitionOutcome base = recognition_rate(subs, plain);
  const RecognitionOutcome base_filtered = recognition_rate(subs, filtered);
  const RecognitionOutcome fused = ua_fused_recognition(subs, plain);
  const RecognitionOutcome fused_filtered = ua_fused_recognition(subs, filtered);

  const auto dists = intra_device_distances(subs);
  std::vector<ZAxisFingerprint> points;
  points.reserve(subs.size());
  for (const auto& s : subs) points.push_back(s.fingerprint);
  const GridSpec grid =
      GridSpec::from_points(points, cfg.grid_o_width, cfg.grid_s_width);
  const GridEntropyReport entropy = grid_entropy(points, grid);
  const OriginSensitivity origin =
      origin_sensitivity(points, grid, cfg.origin_fractions);

  ExperimentResult result;
  result.info.emplace_back("two_submission_devices",
                           fmt_count(cfg.two_submission_devices));
  result.info.emplace_back("one_submission_devices",
                           fmt_count(cfg.one_submission_devices));
  result.info.emplace_back("submissions", fmt_count(subs.size()));
  result.info.emplace_back("m_sz", dump_double(cfg.distance.m_sz));
  result.info.emplace_back("filter_percentile",
                           dump_double(*cfg.filter_percentile));
  result.columns = {"metric", "value"};
  result.rows.push_back({"recognition_rate", dump_double(base.fraction)});
  result.rows.push_back(
      {"recognition_rate_filtered", dump_double(base_filtered.fraction)});
  result.rows.push_back({"ua_fused_rate", dump_double(fused.fraction)});
  result.rows.push_back(
      {"ua_fused_rate_filtered", dump_double(fused_filtered.fraction)});
  result.rows.push_back(
      {"delta_o_p95", dump_double(percentile_nearest_rank(dists.d_o, 95.0))});
  result.rows.push_back(
      {"delta_s_p95", dump_double(percentile_nearest_rank(dists.d_s, 95.0))});
  result.rows.push_back({"entropy_bits", fmt_bits(entropy.entropy_bits)});
  result.rows.push_back({"entropy_origin_min_bits", fmt_bits(origin.min_bits)});
  result.rows.push_back({"entropy_origin_max_bits", fmt_bits(origin.max_bits)});
  result.rows.push_back({"entropy_origin_spread_bits",
                         fmt_bits(origin.max_bits - origin.min_bits)});
  result.rows.push_back({"occupied_cells", fmt_count(entropy.counts.size())});
  return result;
}

inline ExperimentResult run_entropy(const ExperimentConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_path);
  std::vector<ZAxisFingerprint> points;
  for (const auto& s : ds.submissions) points.push_back(s.fingerprint);
  if (points.empty())
    for (const auto& [id, fp] : ds.accel_fingerprints) points.push_back(fp);
  if (points.empty())
    throw std::invalid_argument(
        "dataset has no submissions or accelerometer fingerprints");

  const GridSpec grid =
      GridSpec::from_points(points, cfg.grid_o_width, cfg.grid_s_width);
  const GridEntropyReport entropy = grid_entropy(points, grid);
  const OriginSensitivity origin =
      origin_sensitivity(points, grid, cfg.origin_fractions);

  ExperimentResult result;
  result.info.emplace_back("dataset", cfg.dataset_path);
  result.info.emplace_back("points", fmt_count(points.size()));
  result.info.emplace_back("grid_o_width", dump_double(cfg.grid_o_width));
  result.info.emplace_back("grid_s_width", dump_double(cfg.grid_s_width));
  result.columns = {"metric", "value"};
  result.rows.push_back({"entropy_bits", fmt_bits(entropy.entropy_bits)});
  result.rows.push_back({"entropy_origin_min_bits", fmt_bits(origin.min_bits)});
  result.rows.push_back({"entropy_origin_max_bits", fmt_bits(origin.max_bits)});
  result.rows.push_back({"entropy_origin_spread_bits",
                         fmt_bits(origin.max_bits - origin.min_bits)});
  result.rows.push_back({"occupied_cells", fmt_count(entropy.counts.size())});
  return result;
}

inline ExperimentResult run_classify(const ExperimentConfig& cfg,
                                     std::uint64_t seed) {
  const Dataset ds = load_dataset(cfg.dataset_path);
  if (ds.audio_fingerprints.empty())
    throw std::invalid_argument("dataset has no audio fingerprints to classify");

  std::vector<LabeledPoint> points;
  for (const auto& [id, fp] : ds.audio_fingerprints)
    points.push_back({extract_features(fp, cfg.variant), id});

  const std::size_t k = cfg.method == "l2" ? 1 : cfg.knn_k;
  std::function<std::string(std::span<const LabeledPoint>,
                            const std::vector<double>&)>
      classifier;
  if (cfg.method == "mle") {
    classifier = [](std::span<const LabeledPoint> train,
                    const std::vector<double>& probe) {
      std::map<std::string, std::vector<std::vector<double>>> groups;
      for (const auto& p : train) groups[p.label].push_back(p.features);
      return mle_classify(mle_fit(groups), probe);
    };
  } else {
    classifier = knn_classifier(k);
  }
  const KfoldResult cv = kfold_accuracy(std::span<const LabeledPoint>(points),
                                        cfg.folds, classifier, seed);

  ExperimentResult result;
  result.info.emplace_back("dataset", cfg.dataset_path);
  result.info.emplace_back("points", fmt_count(points.size()));
  result.info.emplace_back("folds", fmt_count(cfg.folds));
  if (cfg.method != "mle") result.info.emplace_back("k", fmt_count(k));
  result.columns = {"method", "features", "accuracy", "small_class_warning"};
  result.rows.push_back({cfg.method, variant_name(cfg.variant),
                         dump_double(cv.accuracy),
                         cv.small_class_warning ? "yes" : "no"});
  return result;
}

inline ExperimentResult run_simulate(const ExperimentConfig& cfg,
                                     std::uint64_t seed) {
  ExperimentResult result;
  result.dataset.devices = sample_population(cfg.devices, cfg.population, seed);
  result.dataset.submissions =
      simulate_submission_set(result.dataset.devices, cfg.submission_plan, seed);
  result.dataset.validate();
  result.info.emplace_back("devices", fmt_count(result.dataset.devices.size()));
  result.info.emplace_back("submissions",
                           fmt_count(result.dataset.submissions.size()));
  result.columns = {"record_kind", "count"};
  result.rows.push_back({"device", fmt_count(result.dataset.devices.size())});
  result.rows.push_back(
      {"submission", fmt_count(result.dataset.submissions.size())});
  return result;
}

}  // namespace detail

/// Runs the configured experiment with the resolved seed. The same config
/// and seed always produce an identical result object.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       std::uint64_t seed) {
  ExperimentResult result;
  if (cfg.kind == "simulate")
    result = detail::run_simulate(cfg, seed);
  else if (cfg.kind == "audio-l2")
    result = detail::run_audio_l2(cfg, seed);
  else if (cfg.kind == "audio-mle")
    result = detail::run_audio_mle(cfg, seed);
  else if (cfg.kind == "audio-stealth")
    result = detail::run_audio_stealth(cfg, seed);
  else if (cfg.kind == "accel-sweep")
    result = detail::run_accel_sweep(cfg, seed);
  else if (cfg.kind == "accel-recognition")
    result = detail::run_accel_recognition(cfg, seed);
  else if (cfg.kind == "entropy")
    result = detail::run_entropy(cfg);
  else if (cfg.kind == "classify")
    result = detail::run_classify(cfg, seed);
  else
    throw std::invalid_argument("unknown experiment kind '" + cfg.kind + "'");
  result.kind = cfg.kind;
  result.seed = seed;
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, cfg.seed.value_or(0));
}

namespace detail {

inline std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

/// Renders a result as a human-readable text summary or a CSV table. Both
/// forms are deterministic down to the byte for a fixed result.
inline std::string emit_report(const ExperimentResult& result,
                               const std::string& format) {
  std::ostringstream out;
  if (format == "csv") {
    for (std::size_t c = 0; c < result.columns.size(); ++c) {
      if (c) out << ',';
      out << detail::csv_escape(result.columns[c]);
    }
    out << '\n';
    for (const auto& row : result.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out << ',';
        out << detail::csv_escape(row[c]);
      }
      out << '\n';
    }
    return out.str();
  }
  if (format != "text")
    throw std::invalid_argument("unknown report format '" + format + "'");

  out << "experiment: " << result.kind << '\n';
  out << "seed: " << result.seed << '\n';
  for (const auto& [name, value] : result.info)
    out << name << ": " << value << '\n';
  if (!result.columns.empty()) {
    out << '\n';
    std::vector<std::size_t> width(result.columns.size());
    for (std::size_t c = 0; c < result.columns.size(); ++c)
      width[c] = result.columns[c].size();
    for (const auto& row : result.rows)
      for (std::size_t c = 0; c < row.size(); ++c)
        width[c] = std::max(width[c], row[c].size());
    const auto emit_row = [&](const std::vector<std::string>& row) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out << "  ";
        out << row[c];
        if (c + 1 < row.size())
          out << std::string(width[c] - row[c].size(), ' ');
      }
      out << '\n';
    };
    emit_row(result.columns);
    for (const auto& row : result.rows) emit_row(row);
  }
  return out.str();
}

}  // namespace sensorprint
