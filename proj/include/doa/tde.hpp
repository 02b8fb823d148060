#pragma once

// Framing of multichannel audio and pairwise time-delay estimation by
// cross-correlation.
//
// Sign convention (shared with geometry.hpp): tau = arrival_b - arrival_a,
// so tau > 0 when channel b lags channel a.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "doa/errors.hpp"
#include "doa/fft.hpp"
#include "doa/geometry.hpp"

namespace doa {

struct MultichannelFrame {
  std::vector<std::vector<double>> channels;
  double sample_rate = 0.0;  // Hz
  double start_time = 0.0;   // seconds from stream origin

  std::size_t channel_count() const noexcept { return channels.size(); }
  std::size_t length() const noexcept { return channels.empty() ? 0 : channels.front().size(); }

  void validate() const {
    if (channels.empty()) throw Error(ErrorCode::InvalidArgument, "frame has no channels");
    if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
    const std::size_t n = channels.front().size();
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "frame is empty");
    for (const auto& c : channels)
      if (c.size() != n) throw Error(ErrorCode::InvalidArgument, "channel lengths differ");
  }
};

/// Overlapping fixed-length windows over a multichannel signal, produced on
/// demand. Frame i starts at sample i * hop; a trailing partial window is
/// dropped.
class FrameSequence {
 public:
  FrameSequence(std::span<const std::vector<double>> signal, double sample_rate,
                double frame_len, double hop)
      : signal_(signal), sample_rate_(sample_rate) {
    if (signal.empty()) throw Error(ErrorCode::InvalidArgument, "signal has no channels");
    if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
    if (!(frame_len > 0.0) || !(hop > 0.0) || hop > frame_len)
      throw Error(ErrorCode::InvalidArgument, "need frame_len > 0 and 0 < hop <= frame_len");
    const std::size_t total = signal.front().size();
    for (const auto& c : signal)
      if (c.size() != total) throw Error(ErrorCode::InvalidArgument, "channel lengths differ");
    frame_samples_ = static_cast<std::size_t>(std::llround(frame_len * sample_rate));
    hop_samples_ = static_cast<std::size_t>(std::llround(hop * sample_rate));
    if (frame_samples_ == 0 || hop_samples_ == 0)
      throw Error(ErrorCode::InvalidArgument, "frame or hop shorter than one sample");
    if (total < frame_samples_)
      throw Error(ErrorCode::SignalTooShort, "signal shorter than one frame");
    count_ = (total - frame_samples_) / hop_samples_ + 1;
  }

  std::size_t size() const noexcept { return count_; }
  std::size_t frame_samples() const noexcept { return frame_samples_; }
  std::size_t hop_samples() const noexcept { return hop_samples_; }

  MultichannelFrame operator[](std::size_t i) const {
    if (i >= count_) throw Error(ErrorCode::InvalidArgument, "frame index out of range");
    MultichannelFrame f;
    f.sample_rate = sample_rate_;
    const std::size_t begin = i * hop_samples_;
    f.start_time = static_cast<double>(begin) / sample_rate_;
    f.channels.reserve(signal_.size());
    for (const auto& c : signal_)
      f.channels.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(begin),
                              c.begin() + static_cast<std::ptrdiff_t>(begin + frame_samples_));
    return f;
  }

 private:
  std::span<const std::vector<double>> signal_;
  double sample_rate_;
  std::size_t frame_samples_ = 0;
  std::size_t hop_samples_ = 0;
  std::size_t count_ = 0;
};

inline FrameSequence frame_stream(std::span<const std::vector<double>> signal, double sample_rate,
                                  double frame_len, double hop) {
  return FrameSequence(signal, sample_rate, frame_len, hop);
}

enum class Window { Rectangular, Hann };

struct TdeOptions {
  Window window = Window::Rectangular;
  // Applied to the cross spectrum conj(A) * B before the inverse transform;
  // empty means plain cross-correlation.
  std::function<void(std::span<fft::Complex>)> cross_spectrum_weighting;
};

struct TdeResult {
  MicPair pair;
  double tau = 0.0;         // seconds
  double peak_value = 0.0;  // normalized correlation at the integer peak
};

/// Pairwise delays for one frame. Channel spectra are computed once and
/// reused across pairs; one instance per thread.
class FrameCorrelator {
 public:
  FrameCorrelator(const MultichannelFrame& frame, std::size_t max_lag_samples,
                  TdeOptions options = {})
      : frame_(frame), options_(std::move(options)) {
    frame_.validate();
    const std::size_t n = frame_.length();
    nfft_ = fft::next_pow2(n + max_lag_samples + 2);
    plan_ = fft::RealPlan::get(nfft_);
    spectra_.resize(frame_.channel_count());
    energy_.resize(frame_.channel_count(), 0.0);
    work_real_ = fft::AlignedBuffer<double>(nfft_);
    work_spec_ = fft::AlignedBuffer<fft::Complex>(nfft_ / 2 + 1);
  }

  /// Cross-correlation delay of channel index_b relative to index_a,
  /// searched over |lag| <= ceil(d/v * fs) and refined by a parabola through
  /// the peak and its two neighbours.
  TdeResult estimate(const MicPair& pair, double speed_of_sound) {
    if (pair.index_a >= frame_.channel_count() || pair.index_b >= frame_.channel_count())
      throw Error(ErrorCode::InvalidArgument, "pair index exceeds channel count");
    if (!(speed_of_sound > 0.0))
      throw Error(ErrorCode::InvalidArgument, "speed of sound must be positive");
    const double fs = frame_.sample_rate;
    const double max_tau = pair.baseline / speed_of_sound;
    const auto max_lag = static_cast<long>(std::ceil(max_tau * fs));
    if (static_cast<std::size_t>(max_lag) + frame_.length() + 2 > nfft_)
      throw Error(ErrorCode::InvalidArgument, "lag window exceeds correlator size");

    const auto& a = spectrum(pair.index_a);
    const auto& b = spectrum(pair.index_b);
    const double ea = energy_[pair.index_a], eb = energy_[pair.index_b];
    if (ea == 0.0 || eb == 0.0)
      throw Error(ErrorCode::DegenerateSignal,
                  "channel " + std::to_string(ea == 0.0 ? pair.index_a : pair.index_b) +
                      " is silent");

    for (std::size_t k = 0; k < work_spec_.size(); ++k) work_spec_[k] = std::conj(a[k]) * b[k];
    if (options_.cross_spectrum_weighting) options_.cross_spectrum_weighting(work_spec_.span());
    plan_->inverse(work_spec_.data(), work_real_.data());

    auto corr = [&](long lag) {
      const auto idx = lag >= 0 ? static_cast<std::size_t>(lag)
                                : nfft_ - static_cast<std::size_t>(-lag);
      return work_real_[idx];
    };
    long best = 0;
    double best_value = corr(0);
    for (long lag = -max_lag; lag <= max_lag; ++lag) {
      const double v = corr(lag);
      if (v > best_value) {
        best_value = v;
        best = lag;
      }
    }
    const double ym = corr(best - 1), y0 = best_value, yp = corr(best + 1);
    const double denom = ym - 2.0 * y0 + yp;
    double offset = 0.0;
    if (denom < 0.0) offset = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);

    const double limit = max_tau + 1.0 / fs;
    TdeResult out;
    out.pair = pair;
    out.tau = std::clamp((static_cast<double>(best) + offset) / fs, -limit, limit);
    out.peak_value = best_value / (static_cast<double>(nfft_) * std::sqrt(ea * eb));
    return out;
  }

 private:
  const std::vector<fft::Complex>& spectrum(std::size_t ch) {
    auto& s = spectra_[ch];
    if (!s.empty()) return s;
    const auto& x = frame_.channels[ch];
    const std::size_t n = x.size();
    std::fill(work_real_.data(), work_real_.data() + nfft_, 0.0);
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = 1.0;
      if (options_.window == Window::Hann && n > 1)
        w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1));
      work_real_[i] = w * x[i];
      energy += work_real_[i] * work_real_[i];
    }
    energy_[ch] = energy;
    s.resize(nfft_ / 2 + 1);
    plan_->forward(work_real_.data(), work_spec_.data());
    std::copy(work_spec_.data(), work_spec_.data() + s.size(), s.begin());
    return s;
  }

  MultichannelFrame frame_;
  TdeOptions options_;
  std::size_t nfft_ = 0;
  std::shared_ptr<const fft::RealPlan> plan_;
  std::vector<std::vector<fft::Complex>> spectra_;
  std::vector<double> energy_;
  fft::AlignedBuffer<double> work_real_;
  fft::AlignedBuffer<fft::Complex> work_spec_;
};

/// Largest |lag| in samples any pair of `geometry` can need at sample_rate.
inline std::size_t max_lag_samples(const ArrayGeometry& geometry, double sample_rate) {
  double longest = 0.0;
  for (std::size_t i = 0; i < geometry.size(); ++i)
    for (std::size_t j = i + 1; j < geometry.size(); ++j)
      longest = std::max(longest, norm(geometry.mics()[j] - geometry.mics()[i]));
  return static_cast<std::size_t>(std::ceil(longest / geometry.speed_of_sound() * sample_rate));
}

/// Single-pair convenience wrapper around FrameCorrelator.
inline TdeResult estimate_tde(const MultichannelFrame& frame, const MicPair& pair,
                              double speed_of_sound, const TdeOptions& options = {}) {
  const auto lag = static_cast<std::size_t>(
      std::ceil(pair.baseline / speed_of_sound * frame.sample_rate));
  FrameCorrelator correlator(frame, lag, options);
  return correlator.estimate(pair, speed_of_sound);
}

}  // namespace doa
