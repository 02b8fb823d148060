#pragma once

// Plane-wave multichannel test audio: a sum of random tones, each delayed
// exactly per microphone. No FFT involved, so delays are exact in continuous
// time and the signal is band-limited by construction.

#include <cmath>
#include <random>
#include <vector>

#include "doa/angles.hpp"
#include "doa/geometry.hpp"

namespace doa::synth {

struct Tone {
  double freq;   // Hz
  double phase;  // radians
  double amp;
};

inline std::vector<Tone> random_tones(std::size_t count, double f_lo, double f_hi,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(f_lo, f_hi), ph(0.0, kTwoPi), a(0.5, 1.0);
  std::vector<Tone> out(count);
  for (auto& t : out) t = {f(rng), ph(rng), a(rng)};
  return out;
}

/// First n samples of each microphone's signal for a far-field source in
/// direction phi. Peak amplitude stays below 1 for WAV export.
inline std::vector<std::vector<double>> render(const ArrayGeometry& g, double phi,
                                               const std::vector<Tone>& tones, double fs,
                                               std::size_t n) {
  const Vec2 u{std::cos(phi), std::sin(phi)};
  double total = 0.0;
  for (const auto& t : tones) total += t.amp;
  const double scale = 0.9 / total;
  std::vector<std::vector<double>> channels(g.size(), std::vector<double>(n));
  for (std::size_t m = 0; m < g.size(); ++m) {
    const Vec2 p = g.mics()[m];
    const double arrival = -(p.x * u.x + p.y * u.y) / g.speed_of_sound();
    auto& c = channels[m];
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs - arrival;
      double s = 0.0;
      for (const auto& tone : tones) s += tone.amp * std::cos(kTwoPi * tone.freq * t + tone.phase);
      c[i] = s * scale;
    }
  }
  return channels;
}

}  // namespace doa::synth
