#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sensorprint {

/// Standard gravity, m/s^2. Geographic variation is out of scope; all
/// simulated sites share this value.
inline constexpr double kGravity = 9.80665;

inline constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }

  Vec3 normalized() const {
    const double n = norm();
    if (n == 0.0) throw std::invalid_argument("cannot normalize zero vector");
    return {x / n, y / n, z / n};
  }

  /// Angle to another vector in radians, in [0, pi]. Uses the half-angle
  /// form, which stays accurate where acos of the cosine degrades (near 0
  /// and pi).
  double angle_to(const Vec3& o) const {
    const Vec3 a = normalized(), b = o.normalized();
    const Vec3 diff{a.x - b.x, a.y - b.y, a.z - b.z};
    const Vec3 sum{a.x + b.x, a.y + b.y, a.z + b.z};
    return 2.0 * std::atan2(diff.norm(), sum.norm());
  }
};

/// Device attitude as intrinsic Euler angles (radians). The device-to-world
/// rotation is R = Rz(yaw) * Ry(pitch) * Rx(roll); the gravity reaction seen
/// by a resting device is R^T * (0, 0, g). Identity is face-up on a level
/// surface, roll = pi is face-down. Yaw does not move gravity.
struct Orientation {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Vec3 gravity_in_device_frame() const {
    const double sr = std::sin(roll), cr = std::cos(roll);
    const double sp = std::sin(pitch), cp = std::cos(pitch);
    return {-kGravity * sp, kGravity * sr * cp, kGravity * cr * cp};
  }

  static Orientation face_up() { return {0.0, 0.0, 0.0}; }
  static Orientation face_down() { return {kPi, 0.0, 0.0}; }

  /// Orientation whose gravity image points along `dir` (device frame).
  static Orientation from_gravity_direction(const Vec3& dir) {
    const Vec3 d = dir.normalized();
    Orientation o;
    o.pitch = std::asin(std::clamp(-d.x, -1.0, 1.0));
    o.roll = std::atan2(d.y, d.z);
    o.yaw = 0.0;
    return o;
  }
};

/// Linear per-axis sensor bias: measured = true * sensitivity + offset.
/// An ideal accelerometer has all sensitivities 1 and all offsets 0.
struct AccelCalibration {
  double s_x = 1.0, s_y = 1.0, s_z = 1.0;  // dimensionless, > 0
  double o_x = 0.0, o_y = 0.0, o_z = 0.0;  // m/s^2

  void validate() const {
    const double vals[] = {s_x, s_y, s_z, o_x, o_y, o_z};
    for (double v : vals)
      if (!std::isfinite(v))
        throw std::invalid_argument("accel calibration has non-finite value");
    if (s_x <= 0.0 || s_y <= 0.0 || s_z <= 0.0)
      throw std::invalid_argument("accel sensitivities must be positive");
  }
};

struct NoiseSpec {
  double audio_sigma = 0.0;        // additive std dev on recorded samples
  double accel_sigma = 0.0;        // per-axis std dev, m/s^2
  double quantization_step = 0.0;  // m/s^2; 0 disables quantization

  void validate() const {
    if (audio_sigma < 0.0 || accel_sigma < 0.0 || quantization_step < 0.0)
      throw std::invalid_argument("noise parameters must be non-negative");
  }
};

/// Piecewise-linear curve over frequency. Evaluation clamps outside the
/// tabulated range; an empty curve is identically zero.
struct ResponseCurve {
  std::vector<double> freqs_hz;  // strictly ascending
  std::vector<double> values;    // same length

  double at(double f) const {
    if (freqs_hz.empty()) return 0.0;
    if (f <= freqs_hz.front()) return values.front();
    if (f >= freqs_hz.back()) return values.back();
    const auto it = std::upper_bound(freqs_hz.begin(), freqs_hz.end(), f);
    const std::size_t hi = static_cast<std::size_t>(it - freqs_hz.begin());
    const std::size_t lo = hi - 1;
    const double t = (f - freqs_hz[lo]) / (freqs_hz[hi] - freqs_hz[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
  }

  void validate(const char* what) const {
    if (freqs_hz.size() != values.size())
      throw std::invalid_argument(std::string(what) +
                                  ": frequency/value length mismatch");
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
      if (!std::isfinite(freqs_hz[i]) || !std::isfinite(values[i]))
        throw std::invalid_argument(std::string(what) + ": non-finite entry");
      if (i > 0 && freqs_hz[i] <= freqs_hz[i - 1])
        throw std::invalid_argument(std::string(what) +
                                    ": frequencies must be ascending");
    }
  }
};

/// Speaker-microphone loop response of one device: gain deviation from the
/// nominal 0 dB curve plus harmonic distortion. h2 and h3 are the fractions
/// of the fundamental's recorded amplitude emitted at twice and three times
/// the played frequency.
struct AudioResponseProfile {
  ResponseCurve gain_db;
  double h2 = 0.0;
  double h3 = 0.0;

  void validate() const {
    gain_db.validate("audio gain curve");
    if (!(h2 >= 0.0 && h2 < 1.0) || !(h3 >= 0.0 && h3 < 1.0))
      throw std::invalid_argument("harmonic coefficients must be in [0, 1)");
  }
};

/// Acoustic effect of the surface/surroundings a device rests on: a fixed
/// per-frequency gain shift plus per-frequency excess variance (dB^2) that is
/// redrawn on every measurement.
struct LocationEffect {
  ResponseCurve gain_db;
  ResponseCurve var_db2;

  void validate() const {
    gain_db.validate("location gain curve");
    var_db2.validate("location variance curve");
    for (double v : var_db2.values)
      if (v < 0.0)
        throw std::invalid_argument("location excess variance must be >= 0");
  }
};

/// Ground truth of one simulated device.
struct DeviceProfile {
  std::string device_id;
  AudioResponseProfile audio;
  AccelCalibration accel;
  std::string user_agent;
  NoiseSpec noise;
};

struct AccelSample {
  double t = 0.0;  // seconds
  double x = 0.0, y = 0.0, z = 0.0;  // measured acceleration, m/s^2
};

struct Recording {
  int sample_rate = 8000;  // Hz
  std::vector<double> samples;
};

/// Z-axis calibration pair, ground truth or estimated.
struct ZAxisFingerprint {
  double o_z = 0.0;  // m/s^2
  double s_z = 1.0;  // dimensionless, > 0
};

/// One fingerprint observation as collected from a device. The cookie
/// correlates repeat observations from the same device; timestamps order
/// them (first = enrollment, second = probe).
struct Submission {
  std::string cookie_id;
  std::string user_agent;
  ZAxisFingerprint fingerprint;
  std::int64_t timestamp = 0;
};

}  // namespace sensorprint
