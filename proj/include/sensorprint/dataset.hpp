#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sensorprint/accel_fingerprint.hpp"
#include "sensorprint/audio_fingerprint.hpp"
#include "sensorprint/sensor_types.hpp"

namespace sensorprint {

/// Filesystem failure, as opposed to malformed content. Callers that map
/// errors to exit codes can tell the two apart by type.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Playback parameters of one capture, kept alongside fingerprints so a
/// dataset documents how its measurements were taken.
struct RecordingMeta {
  std::string device_id;
  std::vector<double> frequencies_hz;
  double amplitude = 1.0;
  double duration_s = 1.0;
  int sample_rate = 8000;
};

/// On-disk record collections. Serialized as JSON Lines with a "kind" tag
/// per record; real values travel as shortest round-trip decimal strings so
/// store then load reproduces every bit and re-storing reproduces every
/// byte.
struct Dataset {
  std::vector<DeviceProfile> devices;
  std::vector<RecordingMeta> recordings;
  std::vector<std::pair<std::string, AudioFingerprint>> audio_fingerprints;
  std::vector<std::pair<std::string, ZAxisFingerprint>> accel_fingerprints;
  std::vector<std::pair<std::string, SixParamFingerprint>> six_param_fingerprints;
  std::vector<Submission> submissions;

  bool empty() const {
    return devices.empty() && recordings.empty() && audio_fingerprints.empty() &&
           accel_fingerprints.empty() && six_param_fingerprints.empty() &&
           submissions.empty();
  }

  /// Referential integrity: when the dataset carries device records, every
  /// other record must point at one of them.
  void validate() const {
    if (devices.empty()) return;
    std::set<std::string> ids;
    for (const auto& d : devices) {
      if (!ids.insert(d.device_id).second)
        throw std::invalid_argument("duplicate device id: " + d.device_id);
    }
    const auto check = [&](const std::string& id, const char* what) {
      if (ids.find(id) == ids.end())
        throw std::invalid_argument(std::string(what) +
                                    " references unknown device: " + id);
    };
    for (const auto& r : recordings) check(r.device_id, "recording");
    for (const auto& [id, fp] : audio_fingerprints) check(id, "audio fingerprint");
    for (const auto& [id, fp] : accel_fingerprints) check(id, "accel fingerprint");
    for (const auto& [id, fp] : six_param_fingerprints)
      check(id, "six-param fingerprint");
    for (const auto& s : submissions) check(s.cookie_id, "submission");
  }
};

namespace detail {

using json = nlohmann::json;

inline std::string dump_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

[[noreturn]] inline void record_error(std::size_t line, const std::string& msg) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + msg);
}

inline const json& require(const json& j, const char* key, std::size_t line) {
  const auto it = j.find(key);
  if (it == j.end()) record_error(line, std::string("missing field '") + key + "'");
  return *it;
}

inline void check_keys(const json& j, std::set<std::string> allowed,
                       std::size_t line) {
  for (const auto& [key, value] : j.items())
    if (allowed.find(key) == allowed.end())
      record_error(line, "unknown field '" + key + "'");
}

inline std::string as_string(const json& j, const char* key, std::size_t line) {
  const json& v = require(j, key, line);
  if (!v.is_string())
    record_error(line, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

/// Accepts the canonical decimal-string form and, for hand-written files,
/// a plain JSON number.
inline double as_double(const json& v, const std::string& key, std::size_t line) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    double out = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size()) return out;
  }
  record_error(line, "field '" + key + "' must be a number");
}

inline double field_double(const json& j, const char* key, std::size_t line) {
  return as_double(require(j, key, line), key, line);
}

inline std::int64_t field_int(const json& j, const char* key, std::size_t line) {
  const json& v = require(j, key, line);
  if (!v.is_number_integer())
    record_error(line, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

inline std::vector<double> field_double_array(const json& j, const char* key,
                                              std::size_t line) {
  const json& v = require(j, key, line);
  if (!v.is_array())
    record_error(line, std::string("field '") + key + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(as_double(e, key, line));
  return out;
}

inline json double_array(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) arr.push_back(dump_double(v));
  return arr;
}

inline json device_to_json(const DeviceProfile& d) {
  json j;
  j["kind"] = "device";
  j["device_id"] = d.device_id;
  j["user_agent"] = d.user_agent;
  j["audio"]["gain_freqs_hz"] = double_array(d.audio.gain_db.freqs_hz);
  j["audio"]["gain_db"] = double_array(d.audio.gain_db.values);
  j["audio"]["h2"] = dump_double(d.audio.h2);
  j["audio"]["h3"] = dump_double(d.audio.h3);
  j["accel"]["s_x"] = dump_double(d.accel.s_x);
  j["accel"]["s_y"] = dump_double(d.accel.s_y);
  j["accel"]["s_z"] = dump_double(d.accel.s_z);
  j["accel"]["o_x"] = dump_double(d.accel.o_x);
  j["accel"]["o_y"] = dump_double(d.accel.o_y);
  j["accel"]["o_z"] = dump_double(d.accel.o_z);
  j["noise"]["audio_sigma"] = dump_double(d.noise.audio_sigma);
  j["noise"]["accel_sigma"] = dump_double(d.noise.accel_sigma);
  j["noise"]["quantization_step"] = dump_double(d.noise.quantization_step);
  return j;
}

inline DeviceProfile device_from_json(const json& j, std::size_t line) {
  check_keys(j, {"kind", "device_id", "user_agent", "audio", "accel", "noise"},
             line);
  DeviceProfile d;
  d.device_id = as_string(j, "device_id", line);
  d.user_agent = as_string(j, "user_agent", line);
  const json& audio = require(j, "audio", line);
  check_keys(audio, {"gain_freqs_hz", "gain_db", "h2", "h3"}, line);
  d.audio.gain_db.freqs_hz = field_double_array(audio, "gain_freqs_hz", line);
  d.audio.gain_db.values = field_double_array(audio, "gain_db", line);
  d.audio.h2 = field_double(audio, "h2", line);
  d.audio.h3 = field_double(audio, "h3", line);
  const json& accel = require(j, "accel", line);
  check_keys(accel, {"s_x", "s_y", "s_z", "o_x", "o_y", "o_z"}, line);
  d.accel.s_x = field_double(accel, "s_x", line);
  d.accel.s_y = field_double(accel, "s_y", line);
  d.accel.s_z = field_double(accel, "s_z", line);
  d.accel.o_x = field_double(accel, "o_x", line);
  d.accel.o_y = field_double(accel, "o_y", line);
  d.accel.o_z = field_double(accel, "o_z", line);
  const json& noise = require(j, "noise", line);
  check_keys(noise, {"audio_sigma", "accel_sigma", "quantization_step"}, line);
  d.noise.audio_sigma = field_double(noise, "audio_sigma", line);
  d.noise.accel_sigma = field_double(noise, "accel_sigma", line);
  d.noise.quantization_step = field_double(noise, "quantization_step", line);
  return d;
}

inline json recording_to_json(const RecordingMeta& r) {
  json j;
  j["kind"] = "recording";
  j["device_id"] = r.device_id;
  j["frequencies_hz"] = double_array(r.frequencies_hz);
  j["amplitude"] = dump_double(r.amplitude);
  j["duration_s"] = dump_double(r.duration_s);
  j["sample_rate"] = r.sample_rate;
  return j;
}

inline RecordingMeta recording_from_json(const json& j, std::size_t line) {
  check_keys(j,
             {"kind", "device_id", "frequencies_hz", "amplitude", "duration_s",
              "sample_rate"},
             line);
  RecordingMeta r;
  r.device_id = as_string(j, "device_id", line);
  r.frequencies_hz = field_double_array(j, "frequencies_hz", line);
  r.amplitude = field_double(j, "amplitude", line);
  r.duration_s = field_double(j, "duration_s", line);
  r.sample_rate = static_cast<int>(field_int(j, "sample_rate", line));
  return r;
}

inline json audio_fp_to_json(const std::string& device_id,
                             const AudioFingerprint& fp) {
  json j;
  j["kind"] = "audio_fingerprint";
  j["device_id"] = device_id;
  json entries = json::array();
  for (const auto& [key, value] : fp.entries()) {
    json e;
    e["freq_hz"] = dump_double(key.first);
    e["harmonic"] = key.second;
    e["value"] = dump_double(value);
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  return j;
}

inline std::pair<std::string, AudioFingerprint> audio_fp_from_json(
    const json& j, std::size_t line) {
  check_keys(j, {"kind", "device_id", "entries"}, line);
  std::pair<std::string, AudioFingerprint> out;
  out.first = as_string(j, "device_id", line);
  const json& entries = require(j, "entries", line);
  if (!entries.is_array())
    record_error(line, "field 'entries' must be an array");
  for (const auto& e : entries) {
    check_keys(e, {"freq_hz", "harmonic", "value"}, line);
    out.second.set(field_double(e, "freq_hz", line),
                   static_cast<int>(field_int(e, "harmonic", line)),
                   field_double(e, "value", line));
  }
  return out;
}

inline json accel_fp_to_json(const std::string& device_id,
                             const ZAxisFingerprint& fp) {
  json j;
  j["kind"] = "accel_fingerprint";
  j["device_id"] = device_id;
  j["o_z"] = dump_double(fp.o_z);
  j["s_z"] = dump_double(fp.s_z);
  return j;
}

inline std::pair<std::string, ZAxisFingerprint> accel_fp_from_json(
    const json& j, std::size_t line) {
  check_keys(j, {"kind", "device_id", "o_z", "s_z"}, line);
  return {as_string(j, "device_id", line),
          {field_double(j, "o_z", line), field_double(j, "s_z", line)}};
}

inline json six_param_fp_to_json(const std::string& device_id,
                                 const SixParamFingerprint& fp) {
  json j;
  j["kind"] = "six_param_fingerprint";
  j["device_id"] = device_id;
  j["params"]["o_x"] = dump_double(fp.params.o_x);
  j["params"]["o_y"] = dump_double(fp.params.o_y);
  j["params"]["o_z"] = dump_double(fp.params.o_z);
  j["params"]["s_x"] = dump_double(fp.params.s_x);
  j["params"]["s_y"] = dump_double(fp.params.s_y);
  j["params"]["s_z"] = dump_double(fp.params.s_z);
  j["residual_norm"] = dump_double(fp.residual_norm);
  j["converged"] = fp.converged;
  j["iterations"] = fp.iterations;
  return j;
}

inline std::pair<std::string, SixParamFingerprint> six_param_fp_from_json(
    const json& j, std::size_t line) {
  check_keys(j,
             {"kind", "device_id", "params", "residual_norm", "converged",
              "iterations"},
             line);
  std::pair<std::string, SixParamFingerprint> out;
  out.first = as_string(j, "device_id", line);
  const json& p = require(j, "params", line);
  check_keys(p, {"o_x", "o_y", "o_z", "s_x", "s_y", "s_z"}, line);
  out.second.params.o_x = field_double(p, "o_x", line);
  out.second.params.o_y = field_double(p, "o_y", line);
  out.second.params.o_z = field_double(p, "o_z", line);
  out.second.params.s_x = field_double(p, "s_x", line);
  out.second.params.s_y = field_double(p, "s_y", line);
  out.second.params.s_z = field_double(p, "s_z", line);
  out.second.residual_norm = field_double(j, "residual_norm", line);
  const json& conv = require(j, "converged", line);
  if (!conv.is_boolean())
    record_error(line, "field 'converged' must be a boolean");
  out.second.converged = conv.get<bool>();
  out.second.iterations =
      static_cast<std::size_t>(field_int(j, "iterations", line));
  return out;
}

inline json submission_to_json(const Submission& s) {
  json j;
  j["kind"] = "submission";
  j["cookie_id"] = s.cookie_id;
  j["user_agent"] = s.user_agent;
  j["o_z"] = dump_double(s.fingerprint.o_z);
  j["s_z"] = dump_double(s.fingerprint.s_z);
  j["timestamp"] = s.timestamp;
  return j;
}

inline Submission submission_from_json(const json& j, std::size_t line) {
  check_keys(j, {"kind", "cookie_id", "user_agent", "o_z", "s_z", "timestamp"},
             line);
  Submission s;
  s.cookie_id = as_string(j, "cookie_id", line);
  s.user_agent = as_string(j, "user_agent", line);
  s.fingerprint.o_z = field_double(j, "o_z", line);
  s.fingerprint.s_z = field_double(j, "s_z", line);
  s.timestamp = field_int(j, "timestamp", line);
  return s;
}

}  // namespace detail

/// Canonical JSON Lines form of the dataset: one record per line, keys
/// sorted, reals as decimal strings. Byte-stable, so equal datasets always
/// serialize identically.
inline std::string serialize_dataset(const Dataset& ds) {
  std::ostringstream out;
  for (const auto& d : ds.devices) out << detail::device_to_json(d).dump() << '\n';
  for (const auto& r : ds.recordings)
    out << detail::recording_to_json(r).dump() << '\n';
  for (const auto& [id, fp] : ds.audio_fingerprints)
    out << detail::audio_fp_to_json(id, fp).dump() << '\n';
  for (const auto& [id, fp] : ds.accel_fingerprints)
    out << detail::accel_fp_to_json(id, fp).dump() << '\n';
  for (const auto& [id, fp] : ds.six_param_fingerprints)
    out << detail::six_param_fp_to_json(id, fp).dump() << '\n';
  for (const auto& s : ds.submissions)
    out << detail::submission_to_json(s).dump() << '\n';
  return out.str();
}

/// Parses the JSON Lines form. Errors carry the 1-based line number and the
/// offending field. Blank lines are allowed and skipped.
inline Dataset parse_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    detail::json j;
    try {
      j = detail::json::parse(line);
    } catch (const detail::json::parse_error& e) {
      detail::record_error(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object())
      detail::record_error(lineno, "record must be a JSON object");
    const std::string kind = detail::as_string(j, "kind", lineno);
    if (kind == "device")
      ds.devices.push_back(detail::device_from_json(j, lineno));
    else if (kind == "recording")
      ds.recordings.push_back(detail::recording_from_json(j, lineno));
    else if (kind == "audio_fingerprint")
      ds.audio_fingerprints.push_back(detail::audio_fp_from_json(j, lineno));
    else if (kind == "accel_fingerprint")
      ds.accel_fingerprints.push_back(detail::accel_fp_from_json(j, lineno));
    else if (kind == "six_param_fingerprint")
      ds.six_param_fingerprints.push_back(detail::six_param_fp_from_json(j, lineno));
    else if (kind == "submission")
      ds.submissions.push_back(detail::submission_from_json(j, lineno));
    else
      detail::record_error(lineno, "unknown record kind '" + kind + "'");
  }
  return ds;
}

inline void store_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << serialize_dataset(ds);
  if (!out) throw IoError("write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  try {
    return parse_dataset(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace sensorprint
