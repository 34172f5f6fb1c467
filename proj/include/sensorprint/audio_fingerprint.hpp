#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sensorprint/sensor_types.hpp"

namespace sensorprint {

/// Probe schedule: which frequencies to play and which harmonics to read
/// back from each recording.
struct FrequencyPlan {
  std::vector<double> frequencies_hz;  // ascending, distinct
  std::vector<int> harmonics;          // e.g. {1, 2}
  int sample_rate = 8000;

  /// Seven probe tones between 220 and 1320 Hz, first two harmonics.
  static FrequencyPlan seven_tone() {
    return {{220.0, 330.0, 440.0, 550.0, 660.0, 880.0, 1320.0}, {1, 2}, 8000};
  }

  /// Thirteen probe tones, 100 Hz to 1300 Hz in 100 Hz steps.
  static FrequencyPlan thirteen_tone() {
    FrequencyPlan plan;
    for (int f = 100; f <= 1300; f += 100)
      plan.frequencies_hz.push_back(static_cast<double>(f));
    plan.harmonics = {1, 2};
    plan.sample_rate = 8000;
    return plan;
  }

  void validate() const {
    if (frequencies_hz.empty() || harmonics.empty())
      throw std::invalid_argument("frequency plan is empty");
    if (sample_rate <= 0)
      throw std::invalid_argument("frequency plan sample rate must be > 0");
    double max_f = 0.0;
    for (std::size_t i = 0; i < frequencies_hz.size(); ++i) {
      const double f = frequencies_hz[i];
      if (!(f > 0.0)) throw std::invalid_argument("plan frequency must be > 0");
      if (i > 0 && f <= frequencies_hz[i - 1])
        throw std::invalid_argument("plan frequencies must be ascending and distinct");
      max_f = f;
    }
    int max_j = 0;
    for (int j : harmonics) {
      if (j < 1) throw std::invalid_argument("harmonic index must be >= 1");
      max_j = std::max(max_j, j);
    }
    if (max_f * max_j >= sample_rate / 2.0)
      throw std::invalid_argument(
          "highest harmonic exceeds Nyquist for the plan sample rate");
  }
};

/// Sampled cosine/sine references at one harmonic of one probe frequency.
struct QuadratureBasis {
  double frequency_hz = 0.0;
  int harmonic = 1;
  std::vector<double> cosine;
  std::vector<double> sine;

  static QuadratureBasis make(double freq_hz, int harmonic, std::size_t length,
                              int sample_rate) {
    QuadratureBasis b;
    b.frequency_hz = freq_hz;
    b.harmonic = harmonic;
    b.cosine.resize(length);
    b.sine.resize(length);
    const double w = 2.0 * kPi * harmonic * freq_hz / sample_rate;
    for (std::size_t k = 0; k < length; ++k) {
      b.cosine[k] = std::cos(w * static_cast<double>(k));
      b.sine[k] = std::sin(w * static_cast<double>(k));
    }
    return b;
  }
};

/// Harmonic response values keyed by (probe frequency, harmonic index).
/// Values are amplitudes normalized by the played amplitude, so a lossless
/// loop yields 1.0 at the fundamental.
class AudioFingerprint {
 public:
  using Key = std::pair<double, int>;

  void set(double freq_hz, int harmonic, double value) {
    values_[{freq_hz, harmonic}] = value;
  }

  double at(double freq_hz, int harmonic) const {
    const auto it = values_.find({freq_hz, harmonic});
    if (it == values_.end())
      throw std::out_of_range("fingerprint missing response at " +
                              std::to_string(freq_hz) + " Hz, harmonic " +
                              std::to_string(harmonic));
    return it->second;
  }

  bool contains(double freq_hz, int harmonic) const {
    return values_.count({freq_hz, harmonic}) > 0;
  }

  std::size_t size() const { return values_.size(); }

  /// Distinct probe frequencies in ascending order.
  std::vector<double> frequencies() const {
    std::vector<double> out;
    for (const auto& [key, _] : values_)
      if (out.empty() || out.back() != key.first) out.push_back(key.first);
    return out;
  }

  /// Responses of one harmonic along the ascending frequency axis.
  /// Throws if any frequency lacks that harmonic.
  std::vector<double> harmonic_series(int harmonic) const {
    std::vector<double> out;
    for (double f : frequencies()) out.push_back(at(f, harmonic));
    return out;
  }

  const std::map<Key, double>& entries() const { return values_; }

 private:
  std::map<Key, double> values_;
};

/// Pure sine tone, phase 0 at the first sample.
inline Recording synthesize_tone(double freq_hz, double amplitude,
                                 double duration_s, int sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be > 0");
  if (!(freq_hz > 0.0) || freq_hz >= sample_rate / 2.0)
    throw std::invalid_argument("tone frequency must lie in (0, Nyquist)");
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be > 0");
  Recording rec;
  rec.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  rec.samples.resize(n);
  const double w = 2.0 * kPi * freq_hz / sample_rate;
  for (std::size_t k = 0; k < n; ++k)
    rec.samples[k] = amplitude * std::sin(w * static_cast<double>(k));
  return rec;
}

/// Amplitude of the harmonic*freq component of a recording: projects onto
/// sampled cosine and sine references and combines the two projections into
/// a magnitude, scaled by 2/N so a unit sine reads 1.0.
inline double quadrature_response(const Recording& rec, double freq_hz,
                                  int harmonic) {
  if (rec.samples.empty())
    throw std::invalid_argument("cannot extract response from empty recording");
  if (harmonic < 1) throw std::invalid_argument("harmonic index must be >= 1");
  const double target = harmonic * freq_hz;
  if (!(freq_hz > 0.0) || target >= rec.sample_rate / 2.0)
    throw std::invalid_argument("harmonic frequency must lie in (0, Nyquist)");
  const std::size_t n = rec.samples.size();
  if (static_cast<double>(n) < rec.sample_rate / target)
    throw std::invalid_argument("window shorter than one cycle of the target");
  const auto basis = QuadratureBasis::make(freq_hz, harmonic, n, rec.sample_rate);
  double c = 0.0, s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    c += basis.cosine[k] * rec.samples[k];
    s += basis.sine[k] * rec.samples[k];
  }
  return 2.0 / static_cast<double>(n) * std::sqrt(c * c + s * s);
}

/// Plays each plan frequency through `play` (a callable returning the
/// recorded loop for one tone), extracts every requested harmonic, and
/// normalizes by the played amplitude. The result is the feedback ratio
/// grid for the device under test.
template <typename PlaybackFn>
AudioFingerprint sweep_fingerprint(PlaybackFn&& play, const FrequencyPlan& plan,
                                   double played_amplitude) {
  plan.validate();
  if (!(played_amplitude > 0.0))
    throw std::invalid_argument("played amplitude must be > 0");
  AudioFingerprint fp;
  for (double f : plan.frequencies_hz) {
    const Recording rec = play(f);
    for (int j : plan.harmonics)
      fp.set(f, j, quadrature_response(rec, f, j) / played_amplitude);
  }
  return fp;
}

namespace detail {

/// Magnitude of one DFT bin, normalized so a full-scale sine centered on the
/// bin reads its amplitude. Works for any window length.
inline double dft_bin_amplitude(const Recording& rec, std::size_t bin) {
  const std::size_t n = rec.samples.size();
  const double w = 2.0 * kPi * static_cast<double>(bin) / static_cast<double>(n);
  double re = 0.0, im = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = w * static_cast<double>(k);
    re += rec.samples[k] * std::cos(phase);
    im -= rec.samples[k] * std::sin(phase);
  }
  return 2.0 / static_cast<double>(n) * std::sqrt(re * re + im * im);
}

}  // namespace detail

/// Extracts the second and third harmonics of several simultaneously played
/// base tones from a single recording via its Fourier magnitude spectrum
/// (nearest bin per harmonic). The bases must not be harmonics of each other,
/// otherwise their distortion products would land on the same bins.
inline AudioFingerprint stealth_fingerprint(const Recording& rec,
                                            const std::vector<double>& base_freqs) {
  if (rec.samples.empty())
    throw std::invalid_argument("cannot extract spectrum from empty recording");
  if (base_freqs.empty()) throw std::invalid_argument("no base frequencies");
  for (double f : base_freqs) {
    if (!(f > 0.0)) throw std::invalid_argument("base frequency must be > 0");
    if (3.0 * f >= rec.sample_rate / 2.0)
      throw std::invalid_argument("third harmonic of base exceeds Nyquist");
  }
  for (std::size_t i = 0; i < base_freqs.size(); ++i) {
    for (std::size_t j = 0; j < base_freqs.size(); ++j) {
      if (i == j) continue;
      const double ratio = base_freqs[i] / base_freqs[j];
      if (std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1.0 - 1e-9)
        throw std::invalid_argument(
            "base frequencies must not be harmonics of one another");
    }
  }
  const std::size_t n = rec.samples.size();
  AudioFingerprint fp;
  for (double f : base_freqs) {
    for (int j : {2, 3}) {
      const double exact_bin = j * f * static_cast<double>(n) / rec.sample_rate;
      const auto bin = static_cast<std::size_t>(std::llround(exact_bin));
      fp.set(f, j, detail::dft_bin_amplitude(rec, bin));
    }
  }
  return fp;
}

/// Middle one-second window of a longer capture. Playback-and-record runs
/// use a three-second tone and analyze only the middle second, away from
/// start/stop transients.
inline Recording middle_second(const Recording& rec) {
  const auto want = static_cast<std::size_t>(rec.sample_rate);
  if (rec.samples.size() < want)
    throw std::invalid_argument("recording shorter than one second");
  const std::size_t start = (rec.samples.size() - want) / 2;
  Recording out;
  out.sample_rate = rec.sample_rate;
  out.samples.assign(rec.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     rec.samples.begin() + static_cast<std::ptrdiff_t>(start + want));
  return out;
}

}  // namespace sensorprint
