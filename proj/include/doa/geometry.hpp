#pragma once

// Planar microphone array model and the single-pair DOA ambiguity.
//
// Angles in the polar frame are measured counterclockwise from +x and kept
// in [0, 2*pi). The pair-frame angle alpha follows the time-delay sign
// convention used throughout the library:
//
//   tau   = arrival_b - arrival_a      (seconds)
//   alpha = asin(tau * v / d)          (alpha > 0: wavefront reaches mic a first)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "doa/angles.hpp"
#include "doa/errors.hpp"

namespace doa {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

inline Vec2 rotate(Vec2 v, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Microphone positions (meters) and speed of sound (m/s).
///
/// Invariants, checked on construction: at least three microphones, pairwise
/// distinct positions, not all collinear (largest triangle area over all
/// triples must reach `collinearity_tolerance` m^2) and speed_of_sound > 0.
class ArrayGeometry {
 public:
  static constexpr double kDefaultCollinearityTolerance = 1e-12;

  ArrayGeometry(std::vector<Vec2> mics, double speed_of_sound,
                double collinearity_tolerance = kDefaultCollinearityTolerance)
      : mics_(std::move(mics)), speed_of_sound_(speed_of_sound) {
    if (mics_.size() < 3)
      throw Error(ErrorCode::DegenerateGeometry, "array needs at least 3 microphones");
    if (!(speed_of_sound_ > 0.0) || !std::isfinite(speed_of_sound_))
      throw Error(ErrorCode::InvalidArgument, "speed of sound must be positive");
    for (const Vec2& m : mics_)
      if (!std::isfinite(m.x) || !std::isfinite(m.y))
        throw Error(ErrorCode::InvalidArgument, "microphone coordinates must be finite");
    for (std::size_t i = 0; i < mics_.size(); ++i)
      for (std::size_t j = i + 1; j < mics_.size(); ++j)
        if (mics_[i] == mics_[j])
          throw Error(ErrorCode::DegenerateGeometry,
                      "microphones " + std::to_string(i) + " and " + std::to_string(j) +
                          " share a position");
    if (max_triangle_area() < collinearity_tolerance)
      throw Error(ErrorCode::DegenerateGeometry, "microphones are collinear");
  }

  /// M microphones evenly spaced on a circle centered at the origin, the
  /// first one at angle `offset`.
  static ArrayGeometry circular(std::size_t count, double radius, double speed_of_sound,
                                double offset = 0.0) {
    std::vector<Vec2> mics;
    mics.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double a = offset + kTwoPi * static_cast<double>(i) / static_cast<double>(count);
      mics.push_back({radius * std::cos(a), radius * std::sin(a)});
    }
    return ArrayGeometry(std::move(mics), speed_of_sound);
  }

  const std::vector<Vec2>& mics() const noexcept { return mics_; }
  std::size_t size() const noexcept { return mics_.size(); }
  double speed_of_sound() const noexcept { return speed_of_sound_; }

  /// Same array rotated about the origin by theta.
  ArrayGeometry rotated(double theta) const {
    std::vector<Vec2> out;
    out.reserve(mics_.size());
    for (const Vec2& m : mics_) out.push_back(rotate(m, theta));
    return ArrayGeometry(std::move(out), speed_of_sound_);
  }

 private:
  double max_triangle_area() const {
    double best = 0.0;
    const std::size_t m = mics_.size();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j)
        for (std::size_t k = j + 1; k < m; ++k) {
          const Vec2 u = mics_[j] - mics_[i];
          const Vec2 w = mics_[k] - mics_[i];
          best = std::max(best, 0.5 * std::abs(u.x * w.y - u.y * w.x));
        }
    return best;
  }

  std::vector<Vec2> mics_;
  double speed_of_sound_;
};

/// Two microphones viewed as a two-element linear array.
struct MicPair {
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  Vec2 midpoint;
  double baseline = 0.0;    // d, meters
  double axis_angle = 0.0;  // the line through both mics, in [0, pi)
  // True when pos_b - pos_a points along axis_angle + pi rather than axis_angle.
  bool axis_reversed = false;
};

inline MicPair make_mic_pair(const ArrayGeometry& geometry, std::size_t a, std::size_t b) {
  const Vec2 pa = geometry.mics().at(a);
  const Vec2 pb = geometry.mics().at(b);
  const Vec2 diff = pb - pa;
  const double direction = wrap_two_pi(std::atan2(diff.y, diff.x));
  MicPair pair;
  pair.index_a = a;
  pair.index_b = b;
  pair.midpoint = 0.5 * (pa + pb);
  pair.baseline = norm(diff);
  pair.axis_reversed = direction >= kPi;
  pair.axis_angle = pair.axis_reversed ? direction - kPi : direction;
  if (pair.axis_angle >= kPi) pair.axis_angle = 0.0;
  return pair;
}

/// All M(M-1)/2 pairs ordered by (index_a, index_b), index_a < index_b.
inline std::vector<MicPair> enumerate_pairs(const ArrayGeometry& geometry) {
  std::vector<MicPair> pairs;
  const std::size_t m = geometry.size();
  pairs.reserve(m * (m - 1) / 2);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) pairs.push_back(make_mic_pair(geometry, a, b));
  return pairs;
}

/// Relative slack for |tau*v/d| slightly above 1; such values are clamped.
inline constexpr double kDefaultClampTolerance = 1e-9;

/// alpha = asin(tau*v/d). Throws OutOfRange when |tau*v/d| > 1 + clamp_tolerance.
inline double pair_doa_from_tde(double tau, double baseline, double speed_of_sound,
                                double clamp_tolerance = kDefaultClampTolerance) {
  if (!(baseline > 0.0) || !(speed_of_sound > 0.0))
    throw Error(ErrorCode::InvalidArgument, "baseline and speed of sound must be positive");
  double s = tau * speed_of_sound / baseline;
  if (!std::isfinite(s) || std::abs(s) > 1.0 + clamp_tolerance)
    throw Error(ErrorCode::OutOfRange,
                "delay exceeds the physical maximum (tau*v/d = " + std::to_string(s) + ")");
  s = std::clamp(s, -1.0, 1.0);
  return std::asin(s);
}

/// Inverse of pair_doa_from_tde: tau = d*sin(alpha)/v.
inline double tde_from_pair_doa(double alpha, double baseline, double speed_of_sound) {
  return baseline * std::sin(alpha) / speed_of_sound;
}

/// Reflection of a polar angle across a line through the origin at axis_angle.
inline double mirror_across_axis(double phi, double axis_angle) {
  return wrap_two_pi(2.0 * axis_angle - phi);
}

/// The two polar-frame directions consistent with one pair's delay.
struct AmbiguousBearing {
  MicPair pair;
  double phi_prime = 0.0;
  double phi_double_prime = 0.0;
};

/// Maps a pair-frame DOA to its two mirror-image polar candidates.
///
/// In the frame of the pair's axis (pointing along axis_angle) the candidate
/// is axis_angle + pi/2 - alpha_axis. alpha_axis equals alpha when the pair is
/// axis_reversed, and -alpha otherwise, so that the index-based delay sign
/// convention holds for every pair orientation.
inline AmbiguousBearing to_polar_candidates(double alpha, const MicPair& pair) {
  const double alpha_axis = pair.axis_reversed ? alpha : -alpha;
  AmbiguousBearing out;
  out.pair = pair;
  out.phi_prime = wrap_two_pi(pair.axis_angle + 0.5 * kPi - alpha_axis);
  out.phi_double_prime = mirror_across_axis(out.phi_prime, pair.axis_angle);
  return out;
}

/// Four-quadrant direction from `from` to `to`, in [0, 2*pi).
inline double true_doa(Vec2 from, Vec2 to) {
  const Vec2 d = to - from;
  const double scale = std::max({1.0, std::abs(from.x), std::abs(from.y), std::abs(to.x),
                                 std::abs(to.y)});
  if (norm(d) <= 4.0 * std::numeric_limits<double>::epsilon() * scale)
    throw Error(ErrorCode::DegenerateGeometry, "direction between coincident points");
  return wrap_two_pi(std::atan2(d.y, d.x));
}

/// Far-field delay tau = arrival_b - arrival_a for a plane wave arriving from
/// polar direction phi.
inline double plane_wave_tde(const ArrayGeometry& geometry, const MicPair& pair, double phi) {
  const Vec2 u{std::cos(phi), std::sin(phi)};
  const Vec2 diff = geometry.mics()[pair.index_b] - geometry.mics()[pair.index_a];
  return -(diff.x * u.x + diff.y * u.y) / geometry.speed_of_sound();
}

}  // namespace doa
