#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sensorprint/accel_fingerprint.hpp"
#include "sensorprint/audio_fingerprint.hpp"
#include "sensorprint/rng.hpp"
#include "sensorprint/sensor_types.hpp"

namespace sensorprint {

/// Feature layouts for audio-fingerprint matching. The base choices are the
/// raw response series of one harmonic; the derived layouts append finite
/// differences along the ascending frequency axis, which emphasize curve
/// shape over absolute level.
enum class DistanceVariant {
  first_harmonic,       // responses at the played frequency
  second_harmonic,      // responses at twice the played frequency
  second_harmonic_d1,   // second harmonic plus first differences
  second_harmonic_d2,   // second harmonic plus first and second differences
};

inline const char* variant_name(DistanceVariant v) {
  switch (v) {
    case DistanceVariant::first_harmonic: return "first-harmonic";
    case DistanceVariant::second_harmonic: return "second-harmonic";
    case DistanceVariant::second_harmonic_d1: return "second-harmonic+d1";
    case DistanceVariant::second_harmonic_d2: return "second-harmonic+d1+d2";
  }
  throw std::invalid_argument("unknown distance variant");
}

/// Ordered feature vector for one fingerprint under the given layout.
/// Throws if the fingerprint lacks the needed harmonic anywhere.
inline std::vector<double> extract_features(const AudioFingerprint& fp,
                                            DistanceVariant variant) {
  const auto diffs = [](const std::vector<double>& v) {
    std::vector<double> d;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) d.push_back(v[i + 1] - v[i]);
    return d;
  };
  if (variant == DistanceVariant::first_harmonic) return fp.harmonic_series(1);
  std::vector<double> features = fp.harmonic_series(2);
  if (variant == DistanceVariant::second_harmonic) return features;
  const std::vector<double> d1 = diffs(features);
  features.insert(features.end(), d1.begin(), d1.end());
  if (variant == DistanceVariant::second_harmonic_d1) return features;
  const std::vector<double> d2 = diffs(d1);
  features.insert(features.end(), d2.begin(), d2.end());
  return features;
}

/// Enrolled feature vectors, one per device, all the same length.
class FingerprintDb {
 public:
  void add(const std::string& device_id, std::vector<double> features) {
    if (features.empty())
      throw std::invalid_argument("cannot enroll an empty feature vector");
    if (!entries_.empty() &&
        entries_.begin()->second.size() != features.size())
      throw std::invalid_argument("feature length differs from enrolled vectors");
    if (!entries_.emplace(device_id, std::move(features)).second)
      throw std::invalid_argument("device already enrolled: " + device_id);
  }

  std::size_t feature_count() const {
    return entries_.empty() ? 0 : entries_.begin()->second.size();
  }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::vector<double>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::vector<double>> entries_;
};

namespace detail {

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

}  // namespace detail

/// Nearest enrolled vector by Euclidean distance. Ties go to the lowest
/// device id (map order).
inline std::string l2_classify(const FingerprintDb& db,
                               const std::vector<double>& probe) {
  if (db.size() == 0) throw std::invalid_argument("empty fingerprint db");
  if (probe.size() != db.feature_count())
    throw std::invalid_argument("probe length does not match enrolled vectors");
  const std::string* best = nullptr;
  double best_d = 0.0;
  for (const auto& [id, vec] : db.entries()) {
    const double d = detail::squared_distance(probe, vec);
    if (best == nullptr || d < best_d) {
      best = &id;
      best_d = d;
    }
  }
  return *best;
}

/// Per-device Gaussian response model: one mean and one variance per
/// feature, variances floored away from zero.
struct MleModel {
  struct DeviceStats {
    std::vector<double> mean;
    std::vector<double> variance;
  };

  std::map<std::string, DeviceStats> devices;
  std::size_t feature_count = 0;
};

inline constexpr double kVarianceFloor = 1e-12;

/// Fits the Gaussian model from repeated observations per device. Variance
/// is the population estimate (divide by n); devices need at least two
/// observations for it to mean anything.
inline MleModel mle_fit(
    const std::map<std::string, std::vector<std::vector<double>>>& training,
    double variance_floor = kVarianceFloor) {
  if (training.empty()) throw std::invalid_argument("empty training set");
  if (!(variance_floor > 0.0))
    throw std::invalid_argument("variance floor must be > 0");
  MleModel model;
  for (const auto& [id, observations] : training) {
    if (observations.size() < 2)
      throw std::invalid_argument("device " + id +
                                  " needs >= 2 observations to fit a variance");
    const std::size_t len = observations.front().size();
    if (len == 0) throw std::invalid_argument("empty observation vector");
    if (model.feature_count == 0) model.feature_count = len;
    for (const auto& obs : observations)
      if (obs.size() != model.feature_count)
        throw std::invalid_argument("observation length mismatch for " + id);

    MleModel::DeviceStats stats;
    stats.mean.assign(len, 0.0);
    stats.variance.assign(len, 0.0);
    const double n = static_cast<double>(observations.size());
    for (const auto& obs : observations)
      for (std::size_t i = 0; i < len; ++i) stats.mean[i] += obs[i];
    for (std::size_t i = 0; i < len; ++i) stats.mean[i] /= n;
    for (const auto& obs : observations)
      for (std::size_t i = 0; i < len; ++i) {
        const double d = obs[i] - stats.mean[i];
        stats.variance[i] += d * d;
      }
    for (std::size_t i = 0; i < len; ++i)
      stats.variance[i] = std::max(stats.variance[i] / n, variance_floor);
    model.devices.emplace(id, std::move(stats));
  }
  return model;
}

/// Most likely source device for the probe: maximizes the variance-weighted
/// log-likelihood score sum_i -(v_i - mean)^2 / variance. Ties go to the
/// lowest device id.
inline std::string mle_classify(const MleModel& model,
                                const std::vector<double>& probe) {
  if (model.devices.empty()) throw std::invalid_argument("empty model");
  if (probe.size() != model.feature_count)
    throw std::invalid_argument("probe length does not match model");
  const std::string* best = nullptr;
  double best_score = 0.0;
  for (const auto& [id, stats] : model.devices) {
    double score = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const double d = probe[i] - stats.mean[i];
      score -= d * d / stats.variance[i];
    }
    if (best == nullptr || score > best_score) {
      best = &id;
      best_score = score;
    }
  }
  return *best;
}

struct ScaledDistanceConfig {
  double m_sz = 300.0;  // weight on sensitivity differences

  void validate() const {
    if (!(m_sz >= 0.0) || !std::isfinite(m_sz))
      throw std::invalid_argument("sensitivity scale must be >= 0");
  }
};

/// Squared distance between Z-axis fingerprints with the sensitivity term
/// scaled up to compensate for its much smaller numeric range:
///   (O_b - O_a)^2 + m_sz * (S_b - S_a)^2.
inline double scaled_accel_distance(const ZAxisFingerprint& a,
                                    const ZAxisFingerprint& b,
                                    const ScaledDistanceConfig& cfg = {}) {
  cfg.validate();
  const double d_o = b.o_z - a.o_z;
  const double d_s = b.s_z - a.s_z;
  return d_o * d_o + cfg.m_sz * d_s * d_s;
}

struct LabeledPoint {
  std::vector<double> features;
  std::string label;
};

/// Majority label among the k nearest training points by Euclidean
/// distance. Equidistant points keep their insertion order; vote ties go to
/// the lowest label.
inline std::string knn_classify(std::span<const LabeledPoint> labeled,
                                const std::vector<double>& probe,
                                std::size_t k) {
  if (labeled.empty()) throw std::invalid_argument("empty training set");
  if (k < 1 || k > labeled.size())
    throw std::invalid_argument("k must lie in [1, training size]");
  for (const auto& p : labeled)
    if (p.features.size() != probe.size())
      throw std::invalid_argument("probe length does not match training points");

  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i)
    order.emplace_back(detail::squared_distance(labeled[i].features, probe), i);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::map<std::string, std::size_t> votes;
  for (std::size_t i = 0; i < k; ++i) ++votes[labeled[order[i].second].label];
  const std::string* best = nullptr;
  std::size_t best_votes = 0;
  for (const auto& [label, count] : votes)
    if (best == nullptr || count > best_votes) {
      best = &label;
      best_votes = count;
    }
  return *best;
}

/// Factory for the classifier callable kfold_accuracy expects.
inline auto knn_classifier(std::size_t k) {
  return [k](std::span<const LabeledPoint> train,
             const std::vector<double>& probe) {
    return knn_classify(train, probe, k);
  };
}

struct KfoldResult {
  double accuracy = 0.0;
  /// Set when some label has fewer members than folds; those labels cannot
  /// appear in every training split.
  bool small_class_warning = false;
};

namespace detail {

inline constexpr std::uint64_t kSeedKfold = 7;

}  // namespace detail

/// Seeded k-fold cross-validation. Points are grouped by label, each group
/// is shuffled and dealt round-robin onto folds (continuing the rotation
/// across groups so the fold sizes stay balanced), then every fold is
/// scored with the classifier trained on the rest.
template <typename Classifier>
KfoldResult kfold_accuracy(std::span<const LabeledPoint> labeled,
                           std::size_t folds, Classifier&& classify,
                           std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  if (labeled.size() < folds)
    throw std::invalid_argument("fewer points than folds");

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    groups[labeled[i].label].push_back(i);

  KfoldResult result;
  std::vector<std::size_t> fold_of(labeled.size());
  Xoshiro256 rng(mix_seed(seed, detail::kSeedKfold));
  std::size_t rotation = 0;
  for (auto& [label, members] : groups) {
    if (members.size() < folds) result.small_class_warning = true;
    for (std::size_t i = members.size(); i > 1; --i) {
      const std::size_t j = rng.next_u64() % i;
      std::swap(members[i - 1], members[j]);
    }
    for (std::size_t p = 0; p < members.size(); ++p)
      fold_of[members[p]] = (rotation + p) % folds;
    rotation += members.size();
  }

  std::size_t correct = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<LabeledPoint> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      if (fold_of[i] == f)
        test.push_back(i);
      else
        train.push_back(labeled[i]);
    }
    for (std::size_t i : test)
      if (classify(std::span<const LabeledPoint>(train), labeled[i].features) ==
          labeled[i].label)
        ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(labeled.size());
  return result;
}

}  // namespace sensorprint
