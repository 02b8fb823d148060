#pragma once

#include <cmath>
#include <numbers>

namespace doa {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle to [0, 2*pi).
inline double wrap_two_pi(double angle) {
  double w = std::fmod(angle, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  // fmod of a tiny negative value can round up to exactly 2*pi.
  if (w >= kTwoPi) w = 0.0;
  return w;
}

/// Smallest signed difference a - b, in [-pi, pi).
inline double signed_angle_difference(double a, double b) {
  double d = wrap_two_pi(a - b);
  return d >= kPi ? d - kTwoPi : d;
}

/// Magnitude of the smallest angle between a and b, in [0, pi].
inline double wrapped_distance(double a, double b) {
  double d = wrap_two_pi(a - b);
  return d > kPi ? kTwoPi - d : d;
}

inline constexpr double deg_to_rad(double deg) { return deg * (std::numbers::pi / 180.0); }
inline constexpr double rad_to_deg(double rad) { return rad * (180.0 / std::numbers::pi); }

}  // namespace doa
