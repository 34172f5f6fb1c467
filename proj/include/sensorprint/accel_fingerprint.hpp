#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sensorprint/sensor_types.hpp"

namespace sensorprint {

/// Contiguous stretch of near-static samples whose magnitude stays near g.
struct RestWindow {
  std::size_t begin = 0;  // index of first sample
  std::size_t end = 0;    // one past last sample
  Vec3 mean;

  std::size_t count() const { return end - begin; }
};

struct RestDetectionConfig {
  double magnitude_tol = 1.0;   // m/s^2 band half-width around g
  double variance_tol = 0.01;   // (m/s^2)^2 per-axis cap
  std::size_t min_samples = 50;
  double dominance = 0.9;       // |z| fraction of the mean needed for up/down
};

/// Maximal runs where every sample magnitude lies in [g - tol, g + tol].
/// Runs shorter than min_samples or with per-axis variance above
/// variance_tol are dropped whole. Windows come back disjoint and ordered.
inline std::vector<RestWindow> detect_rest_windows(
    std::span<const AccelSample> stream, double magnitude_tol,
    double variance_tol, std::size_t min_samples) {
  if (stream.empty()) throw std::invalid_argument("empty accelerometer stream");
  std::vector<RestWindow> windows;
  const auto in_band = [&](const AccelSample& s) {
    const double mag = std::sqrt(s.x * s.x + s.y * s.y + s.z * s.z);
    return mag >= kGravity - magnitude_tol && mag <= kGravity + magnitude_tol;
  };

  std::size_t i = 0;
  while (i < stream.size()) {
    if (!in_band(stream[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < stream.size() && in_band(stream[j])) ++j;
    const std::size_t n = j - i;
    if (n >= min_samples) {
      Vec3 mean;
      for (std::size_t k = i; k < j; ++k) {
        mean.x += stream[k].x;
        mean.y += stream[k].y;
        mean.z += stream[k].z;
      }
      mean.x /= static_cast<double>(n);
      mean.y /= static_cast<double>(n);
      mean.z /= static_cast<double>(n);
      Vec3 var;
      for (std::size_t k = i; k < j; ++k) {
        var.x += (stream[k].x - mean.x) * (stream[k].x - mean.x);
        var.y += (stream[k].y - mean.y) * (stream[k].y - mean.y);
        var.z += (stream[k].z - mean.z) * (stream[k].z - mean.z);
      }
      var.x /= static_cast<double>(n);
      var.y /= static_cast<double>(n);
      var.z /= static_cast<double>(n);
      if (var.x <= variance_tol && var.y <= variance_tol && var.z <= variance_tol)
        windows.push_back({i, j, mean});
    }
    i = j;
  }
  return windows;
}

enum class RestOrientation { face_up, face_down, other };

/// A window counts as face-up (face-down) when its mean points mostly along
/// +Z (-Z): |z| must be at least `dominance` times the mean magnitude.
inline RestOrientation classify_orientation(const RestWindow& window,
                                            double dominance) {
  const double norm = window.mean.norm();
  const double z = window.mean.z;
  if (z > 0.0 && std::abs(z) >= dominance * norm) return RestOrientation::face_up;
  if (z < 0.0 && std::abs(z) >= dominance * norm) return RestOrientation::face_down;
  return RestOrientation::other;
}

/// Closed-form Z-axis calibration from a face-up and a face-down reading:
///   s_z = (z_up - z_down) / (2 g),   o_z = (z_up + z_down) / 2.
inline ZAxisFingerprint estimate_z_axis(double z_up, double z_down) {
  if (!(z_up > z_down))
    throw std::invalid_argument(
        "z_up must exceed z_down; windows are mislabeled");
  return {(z_up + z_down) / 2.0, (z_up - z_down) / (2.0 * kGravity)};
}

/// Sample-count-weighted average of window means. Multiple rest windows of
/// the same orientation merge into one observation this way.
inline Vec3 merge_window_means(std::span<const RestWindow> windows) {
  if (windows.empty()) throw std::invalid_argument("no windows to merge");
  Vec3 sum;
  double total = 0.0;
  for (const auto& w : windows) {
    const auto n = static_cast<double>(w.count());
    sum.x += w.mean.x * n;
    sum.y += w.mean.y * n;
    sum.z += w.mean.z * n;
    total += n;
  }
  return {sum.x / total, sum.y / total, sum.z / total};
}

/// Full Z-axis pipeline over one face-up and one face-down stream: detect
/// rest windows, keep those matching the expected orientation, merge, and
/// apply the closed-form estimator.
inline ZAxisFingerprint z_axis_from_updown_streams(
    std::span<const AccelSample> up_stream,
    std::span<const AccelSample> down_stream,
    const RestDetectionConfig& cfg = {}) {
  const auto collect = [&](std::span<const AccelSample> stream,
                           RestOrientation want) {
    const auto windows = detect_rest_windows(stream, cfg.magnitude_tol,
                                             cfg.variance_tol, cfg.min_samples);
    std::vector<RestWindow> matching;
    for (const auto& w : windows)
      if (classify_orientation(w, cfg.dominance) == want) matching.push_back(w);
    if (matching.empty())
      throw std::invalid_argument("no rest window with the expected orientation");
    return merge_window_means(matching);
  };
  const Vec3 up = collect(up_stream, RestOrientation::face_up);
  const Vec3 down = collect(down_stream, RestOrientation::face_down);
  return estimate_z_axis(up.z, down.z);
}

/// All six bias parameters plus the final objective value of the fit.
struct SixParamFingerprint {
  AccelCalibration params;
  double residual_norm = 0.0;  // sum of squared per-measurement residuals
  bool converged = false;
  std::size_t iterations = 0;

  std::vector<double> as_vector() const {
    return {params.o_x, params.o_y, params.o_z,
            params.s_x, params.s_y, params.s_z};
  }
};

struct FitConfig {
  double gradient_step = 1e-6;     // central-difference half-step (Jacobian)
  double initial_damping = 1e-3;   // starting Levenberg-Marquardt lambda
  std::size_t max_iterations = 500;
  double min_decrease = 1e-14;     // stop once progress falls below this
  double min_orientation_angle_deg = 10.0;

  void validate() const {
    if (!(gradient_step > 0.0) || !(initial_damping > 0.0) ||
        max_iterations == 0 || !(min_decrease > 0.0) ||
        !(min_orientation_angle_deg > 0.0))
      throw std::invalid_argument("fit config must be positive");
  }
};

/// Residual of the gravity-magnitude constraint for one rest measurement:
/// the de-biased reading should have squared magnitude g^2; anything left
/// over is measurement error.
inline double six_param_residual(const AccelCalibration& params, const Vec3& m) {
  if (params.s_x == 0.0 || params.s_y == 0.0 || params.s_z == 0.0)
    throw std::invalid_argument("zero sensitivity in residual evaluation");
  const double tx = (m.x - params.o_x) / params.s_x;
  const double ty = (m.y - params.o_y) / params.s_y;
  const double tz = (m.z - params.o_z) / params.s_z;
  return tx * tx + ty * ty + tz * tz - kGravity * kGravity;
}

namespace detail {

inline void six_param_residuals(const double* theta,
                                std::span<const Vec3> means,
                                std::vector<double>& out) {
  AccelCalibration c;
  c.o_x = theta[0];
  c.o_y = theta[1];
  c.o_z = theta[2];
  c.s_x = theta[3];
  c.s_y = theta[4];
  c.s_z = theta[5];
  out.clear();
  for (const auto& m : means) out.push_back(six_param_residual(c, m));
}

inline double six_param_objective(const double* theta,
                                  std::span<const Vec3> means) {
  std::vector<double> r;
  six_param_residuals(theta, means, r);
  double sum = 0.0;
  for (double eps : r) sum += eps * eps;
  return sum;
}

/// Solves the 6x6 system M x = rhs in place by Gaussian elimination with
/// partial pivoting. Returns false when a pivot is effectively zero.
inline bool solve6(double M[6][7], double* x) {
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int row = col + 1; row < 6; ++row)
      if (std::abs(M[row][col]) > std::abs(M[piv][col])) piv = row;
    if (std::abs(M[piv][col]) < 1e-300) return false;
    if (piv != col)
      for (int q = 0; q < 7; ++q) std::swap(M[piv][q], M[col][q]);
    for (int row = col + 1; row < 6; ++row) {
      const double f = M[row][col] / M[col][col];
      for (int q = col; q < 7; ++q) M[row][q] -= f * M[col][q];
    }
  }
  for (int p = 5; p >= 0; --p) {
    double v = M[p][6];
    for (int q = p + 1; q < 6; ++q) v -= M[p][q] * x[q];
    x[p] = v / M[p][p];
  }
  return true;
}

/// Counts directions that are pairwise separated by at least min_angle,
/// greedily in input order.
inline std::size_t count_distinct_orientations(std::span<const Vec3> means,
                                               double min_angle_rad) {
  std::vector<Vec3> picked;
  for (const auto& m : means) {
    if (m.norm() == 0.0) continue;
    bool distinct = true;
    for (const auto& p : picked)
      if (m.angle_to(p) < min_angle_rad) {
        distinct = false;
        break;
      }
    if (distinct) picked.push_back(m);
  }
  return picked.size();
}

}  // namespace detail

/// Fits all six parameters to rest-window means by minimizing the sum of
/// squared gravity-magnitude residuals. Damped least-squares descent
/// (Levenberg-Marquardt) with a numerical Jacobian, always from the fixed
/// start (offsets 0, sensitivities 1). A step is taken only when it lowers
/// the objective; a rejected step raises the damping, which bends the next
/// attempt toward a short plain-gradient step, so the recorded trace is
/// monotone non-increasing. Optionally records the objective after every
/// accepted step into `objective_trace`.
inline SixParamFingerprint estimate_six_params(
    std::span<const Vec3> means, const FitConfig& cfg = {},
    std::vector<double>* objective_trace = nullptr) {
  cfg.validate();
  const double min_angle = cfg.min_orientation_angle_deg * kPi / 180.0;
  if (detail::count_distinct_orientations(means, min_angle) < 6)
    throw std::invalid_argument(
        "underdetermined: need >= 6 rest means with distinct orientations");

  double theta[6] = {0.0, 0.0, 0.0, 1.0, 1.0, 1.0};
  std::vector<double> r0, rf, rb;
  detail::six_param_residuals(theta, means, r0);
  double obj = 0.0;
  for (double e : r0) obj += e * e;
  if (objective_trace) objective_trace->push_back(obj);

  SixParamFingerprint out;
  double lambda = cfg.initial_damping;
  std::size_t iter = 0;
  bool converged = false;
  for (; iter < cfg.max_iterations; ++iter) {
    detail::six_param_residuals(theta, means, r0);
    const std::size_t n = r0.size();
    std::vector<std::array<double, 6>> jac(n);
    const double h = cfg.gradient_step;
    for (int p = 0; p < 6; ++p) {
      double probe[6];
      for (int q = 0; q < 6; ++q) probe[q] = theta[q];
      probe[p] = theta[p] + h;
      detail::six_param_residuals(probe, means, rf);
      probe[p] = theta[p] - h;
      detail::six_param_residuals(probe, means, rb);
      for (std::size_t i = 0; i < n; ++i)
        jac[i][p] = (rf[i] - rb[i]) / (2.0 * h);
    }

    // Normal equations J^T J delta = -J^T r, with the right-hand side in
    // column 6.
    double A[6][7];
    for (int p = 0; p < 6; ++p) {
      for (int q = 0; q < 6; ++q) {
        A[p][q] = 0.0;
        for (std::size_t i = 0; i < n; ++i) A[p][q] += jac[i][p] * jac[i][q];
      }
      A[p][6] = 0.0;
      for (std::size_t i = 0; i < n; ++i) A[p][6] -= jac[i][p] * r0[i];
    }

    double cand[6];
    double cand_obj = obj;
    bool accepted = false;
    for (int tries = 0; tries < 64; ++tries) {
      double M[6][7];
      for (int p = 0; p < 6; ++p) {
        for (int q = 0; q < 7; ++q) M[p][q] = A[p][q];
        M[p][p] += lambda * (A[p][p] > 0.0 ? A[p][p] : 1.0);
      }
      double delta[6];
      if (detail::solve6(M, delta)) {
        bool feasible = true;
        for (int p = 0; p < 6; ++p) {
          cand[p] = theta[p] + delta[p];
          if (p >= 3 && cand[p] <= 0.0) feasible = false;  // sensitivities stay positive
        }
        if (feasible) {
          cand_obj = detail::six_param_objective(cand, means);
          if (cand_obj < obj) {
            accepted = true;
            break;
          }
        }
      }
      lambda *= 4.0;
    }
    if (!accepted) {
      converged = true;  // no acceptable step even under heavy damping
      break;
    }
    const double decrease = obj - cand_obj;
    for (int p = 0; p < 6; ++p) theta[p] = cand[p];
    obj = cand_obj;
    lambda = std::max(lambda * 0.25, 1e-12);
    if (objective_trace) objective_trace->push_back(obj);
    if (decrease < cfg.min_decrease) {
      converged = true;
      break;
    }
  }

  out.params.o_x = theta[0];
  out.params.o_y = theta[1];
  out.params.o_z = theta[2];
  out.params.s_x = theta[3];
  out.params.s_y = theta[4];
  out.params.s_z = theta[5];
  out.residual_norm = obj;
  out.converged = converged;
  out.iterations = iter;
  return out;
}

}  // namespace sensorprint
