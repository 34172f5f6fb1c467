#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sensorprint/classification.hpp"
#include "sensorprint/sensor_types.hpp"

namespace sensorprint {

struct IntraDeviceDistances {
  std::vector<double> d_o;  // |O_z difference| per two-submission device
  std::vector<double> d_s;  // |S_z difference| per two-submission device
};

namespace detail {

/// Submission indices grouped by cookie, each group ordered by timestamp
/// (ties keep submission order). Groups come back sorted by cookie id.
inline std::map<std::string, std::vector<std::size_t>> group_by_cookie(
    std::span<const Submission> subs) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < subs.size(); ++i)
    groups[subs[i].cookie_id].push_back(i);
  for (auto& [cookie, members] : groups)
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t a, std::size_t b) {
                       return subs[a].timestamp < subs[b].timestamp;
                     });
  return groups;
}

}  // namespace detail

/// Per-dimension absolute fingerprint differences between the two
/// submissions of every exactly-twice-submitting device. Devices with any
/// other submission count are ignored.
inline IntraDeviceDistances intra_device_distances(
    std::span<const Submission> subs) {
  IntraDeviceDistances out;
  for (const auto& [cookie, members] : detail::group_by_cookie(subs)) {
    if (members.size() != 2) continue;
    const auto& a = subs[members[0]].fingerprint;
    const auto& b = subs[members[1]].fingerprint;
    out.d_o.push_back(std::abs(b.o_z - a.o_z));
    out.d_s.push_back(std::abs(b.s_z - a.s_z));
  }
  return out;
}

/// Nearest-rank percentile: the value at sorted index ceil(p/100 * n).
inline double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty())
    throw std::invalid_argument("percentile of an empty list");
  if (!(p > 0.0) || p > 100.0)
    throw std::invalid_argument("percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  return values[rank - 1];
}

/// Uniform rectangular binning of the (O_z, S_z) plane.
struct GridSpec {
  double o_width = 0.045;
  double s_width = 0.0037;
  double o_origin = 0.0;
  double s_origin = 0.0;

  void validate() const {
    if (!(o_width > 0.0) || !(s_width > 0.0))
      throw std::invalid_argument("grid cell widths must be > 0");
    if (!std::isfinite(o_origin) || !std::isfinite(s_origin))
      throw std::invalid_argument("grid origin must be finite");
  }

  /// Grid anchored at the component-wise minimum of the points.
  static GridSpec from_points(std::span<const ZAxisFingerprint> points,
                              double o_width = 0.045, double s_width = 0.0037) {
    if (points.empty())
      throw std::invalid_argument("cannot anchor a grid on no points");
    GridSpec g;
    g.o_width = o_width;
    g.s_width = s_width;
    g.o_origin = points[0].o_z;
    g.s_origin = points[0].s_z;
    for (const auto& p : points) {
      g.o_origin = std::min(g.o_origin, p.o_z);
      g.s_origin = std::min(g.s_origin, p.s_z);
    }
    return g;
  }

  std::pair<long long, long long> cell_of(const ZAxisFingerprint& p) const {
    return {static_cast<long long>(std::floor((p.o_z - o_origin) / o_width)),
            static_cast<long long>(std::floor((p.s_z - s_origin) / s_width))};
  }
};

/// Occupancy histogram over grid cells and its Shannon entropy in bits.
struct GridEntropyReport {
  std::map<std::pair<long long, long long>, std::size_t> counts;
  std::size_t total = 0;
  double entropy_bits = 0.0;

  /// Cell probabilities in counts-map iteration order.
  std::vector<double> probabilities() const {
    std::vector<double> p;
    p.reserve(counts.size());
    for (const auto& [cell, c] : counts)
      p.push_back(static_cast<double>(c) / static_cast<double>(total));
    return p;
  }
};

/// Bins the points and evaluates H = -sum P log2 P over occupied cells.
/// Empty cells carry zero probability and contribute nothing.
inline GridEntropyReport grid_entropy(std::span<const ZAxisFingerprint> points,
                                      const GridSpec& grid) {
  if (points.empty())
    throw std::invalid_argument("cannot compute entropy of no points");
  grid.validate();
  GridEntropyReport report;
  for (const auto& p : points) ++report.counts[grid.cell_of(p)];
  report.total = points.size();
  const double n = static_cast<double>(report.total);
  for (const auto& [cell, c] : report.counts) {
    const double prob = static_cast<double>(c) / n;
    report.entropy_bits -= prob * std::log2(prob);
  }
  return report;
}

struct OriginSensitivity {
  double min_bits = 0.0;
  double max_bits = 0.0;
};

/// Entropy extremes as the grid origin slides by the given fractions of a
/// cell width, tried in every per-axis combination. Fractions must stay
/// within one cell in magnitude.
inline OriginSensitivity origin_sensitivity(
    std::span<const ZAxisFingerprint> points, const GridSpec& grid,
    std::span<const double> fractions) {
  if (fractions.empty())
    throw std::invalid_argument("need at least one origin offset");
  for (double f : fractions)
    if (!std::isfinite(f) || std::abs(f) > 1.0)
      throw std::invalid_argument("origin offsets must be within one cell width");
  OriginSensitivity out;
  bool first = true;
  for (double fo : fractions) {
    for (double fs : fractions) {
      GridSpec shifted = grid;
      shifted.o_origin = grid.o_origin + fo * grid.o_width;
      shifted.s_origin = grid.s_origin + fs * grid.s_width;
      const double h = grid_entropy(points, shifted).entropy_bits;
      if (first || h < out.min_bits) out.min_bits = h;
      if (first || h > out.max_bits) out.max_bits = h;
      first = false;
    }
  }
  return out;
}

/// Settings for the re-identification protocol. When filter_percentile is
/// set, two-submission devices whose intra-device distance lands above that
/// percentile (in either dimension) are removed from the dataset before
/// matching, probes and candidates alike.
struct RecognitionOptions {
  ScaledDistanceConfig distance;
  std::optional<double> filter_percentile;

  void validate() const {
    distance.validate();
    if (filter_percentile &&
        (!(*filter_percentile > 0.0) || *filter_percentile > 100.0))
      throw std::invalid_argument("filter percentile must lie in (0, 100]");
  }
};

struct RecognitionOutcome {
  std::size_t evaluated = 0;  // two-submission devices scored
  std::size_t correct = 0;
  double fraction = 0.0;
};

namespace detail {

/// Shared engine for plain and User-Agent-fused recognition. Each
/// two-submission device's later submission is matched against every other
/// submission point; it is correctly recognized when the nearest point is
/// the same device's earlier submission. Distance ties resolve to the
/// lowest (cookie, timestamp) pair.
inline RecognitionOutcome recognition_impl(std::span<const Submission> subs,
                                           const RecognitionOptions& options,
                                           bool fuse_user_agent) {
  options.validate();
  auto groups = detail::group_by_cookie(subs);

  std::vector<char> dropped(subs.size(), 0);
  if (options.filter_percentile) {
    const auto dists = intra_device_distances(subs);
    if (dists.d_o.empty())
      throw std::invalid_argument("no two-submission devices to filter");
    const double thr_o =
        percentile_nearest_rank(dists.d_o, *options.filter_percentile);
    const double thr_s =
        percentile_nearest_rank(dists.d_s, *options.filter_percentile);
    for (const auto& [cookie, members] : groups) {
      if (members.size() != 2) continue;
      const auto& a = subs[members[0]].fingerprint;
      const auto& b = subs[members[1]].fingerprint;
      if (std::abs(b.o_z - a.o_z) > thr_o || std::abs(b.s_z - a.s_z) > thr_s)
        for (std::size_t i : members) dropped[i] = 1;
    }
  }

  RecognitionOutcome outcome;
  for (const auto& [cookie, members] : groups) {
    if (members.size() != 2) continue;
    const std::size_t enroll = members[0];
    const std::size_t probe = members[1];
    if (dropped[probe]) continue;

    bool found = false;
    std::size_t best = 0;
    double best_d = 0.0;
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (i == probe || dropped[i]) continue;
      if (fuse_user_agent && subs[i].user_agent != subs[probe].user_agent)
        continue;
      const double d = scaled_accel_distance(subs[probe].fingerprint,
                                             subs[i].fingerprint,
                                             options.distance);
      bool better = !found;
      if (found && d != best_d) better = d < best_d;
      if (found && d == best_d) {
        if (subs[i].cookie_id != subs[best].cookie_id)
          better = subs[i].cookie_id < subs[best].cookie_id;
        else
          better = subs[i].timestamp < subs[best].timestamp;
      }
      if (better) {
        found = true;
        best = i;
        best_d = d;
      }
    }
    ++outcome.evaluated;
    if (found && best == enroll) ++outcome.correct;
  }
  if (outcome.evaluated == 0)
    throw std::invalid_argument(
        "no two-submission devices remain to evaluate");
  outcome.fraction = static_cast<double>(outcome.correct) /
                     static_cast<double>(outcome.evaluated);
  return outcome;
}

}  // namespace detail

/// Fraction of two-submission devices whose probe point is nearest to their
/// own enrollment point among all other submissions in the set.
inline RecognitionOutcome recognition_rate(std::span<const Submission> subs,
                                           const RecognitionOptions& options = {}) {
  return detail::recognition_impl(subs, options, false);
}

/// Recognition with candidates restricted to submissions carrying the
/// probe's exact User-Agent string. Devices with a set-unique User-Agent
/// match their own enrollment by elimination.
inline RecognitionOutcome ua_fused_recognition(
    std::span<const Submission> subs, const RecognitionOptions& options = {}) {
  return detail::recognition_impl(subs, options, true);
}

}  // namespace sensorprint
