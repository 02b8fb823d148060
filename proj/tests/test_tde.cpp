#include <gtest/gtest.h>

#include <random>

#include "doa/tde.hpp"
#include "oracles.hpp"

namespace doa {
namespace {

constexpr double kFs = 8000.0;

// Three mics with a 1 m pair (0,1): up to 24 samples of lag at 8 kHz.
const ArrayGeometry& wide() {
  static const ArrayGeometry g({{0, 0}, {1, 0}, {0, 1}}, 343.0);
  return g;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

MultichannelFrame frame_of(std::vector<std::vector<double>> channels) {
  MultichannelFrame f;
  f.channels = std::move(channels);
  f.sample_rate = kFs;
  return f;
}

TEST(FrameStream, Counts) {
  const std::vector<std::vector<double>> four(2, std::vector<double>(32000, 0.0));
  EXPECT_EQ(frame_stream(four, kFs, 1.0, 0.2).size(), 16u);
  const std::vector<std::vector<double>> one(2, std::vector<double>(8000, 0.0));
  EXPECT_EQ(frame_stream(one, kFs, 1.0, 0.2).size(), 1u);
  const std::vector<std::vector<double>> half(2, std::vector<double>(4000, 0.0));
  try {
    frame_stream(half, kFs, 1.0, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SignalTooShort);
  }
}

TEST(FrameStream, FrameContentsAndTimes) {
  std::vector<std::vector<double>> sig(2, std::vector<double>(20));
  for (std::size_t i = 0; i < 20; ++i) {
    sig[0][i] = static_cast<double>(i);
    sig[1][i] = -static_cast<double>(i);
  }
  const auto frames = frame_stream(sig, 10.0, 1.0, 0.5);
  ASSERT_EQ(frames.size(), 3u);
  const auto f = frames[2];
  EXPECT_DOUBLE_EQ(f.start_time, 1.0);
  EXPECT_EQ(f.length(), 10u);
  EXPECT_DOUBLE_EQ(f.channels[0][0], 10.0);
  EXPECT_DOUBLE_EQ(f.channels[1][9], -19.0);
  EXPECT_THROW(frames[3], Error);
}

TEST(FrameStream, RejectsBadArguments) {
  const std::vector<std::vector<double>> sig(2, std::vector<double>(100));
  EXPECT_THROW(frame_stream(sig, kFs, 0.0, 0.2), Error);
  EXPECT_THROW(frame_stream(sig, kFs, 0.01, 0.02), Error);
  EXPECT_THROW(frame_stream(sig, 0.0, 0.01, 0.005), Error);
  std::vector<std::vector<double>> ragged{std::vector<double>(100), std::vector<double>(99)};
  EXPECT_THROW(frame_stream(ragged, kFs, 0.001, 0.001), Error);
}

TEST(EstimateTde, IntegerShift) {
  const auto x = noise(8000 + 7, 1);
  std::vector<double> a(x.begin() + 7, x.end()), b(x.begin(), x.end() - 7);
  const auto r = estimate_tde(frame_of({a, b, a}), make_mic_pair(wide(), 0, 1), 343.0);
  EXPECT_NEAR(r.tau, 7.0 / kFs, 0.5 / kFs);
}

TEST(EstimateTde, IdenticalChannels) {
  const auto x = noise(4000, 2);
  const auto r = estimate_tde(frame_of({x, x, x}), make_mic_pair(wide(), 0, 1), 343.0);
  EXPECT_NEAR(r.tau, 0.0, 1e-12);
  EXPECT_NEAR(r.peak_value, 1.0, 1e-9);
}

TEST(EstimateTde, FractionalDelayAgainstOversampledOracle) {
  const std::size_t n = 8000;
  std::mt19937_64 rng(3);
  const auto spec = oracle::bandlimited_spectrum(n, 0.2, rng);
  const double delay = 3.4;
  const auto a = oracle::synthesize(spec, n, 0.0);
  const auto b = oracle::synthesize(spec, n, delay);

  // Correlation of the band-limited signals on a 0.01-sample lag grid.
  auto delayed = spec;
  for (std::size_t k = 0; k < delayed.size(); ++k)
    delayed[k] *= std::polar(1.0, -kTwoPi * static_cast<double>(k) * delay / static_cast<double>(n));
  double best_lag = 0.0, best = -1e300;
  for (int i = -1000; i <= 1000; ++i) {
    const double lag = i / 100.0;
    const double r = oracle::periodic_correlation(spec, delayed, lag, n);
    if (r > best) {
      best = r;
      best_lag = lag;
    }
  }
  ASSERT_NEAR(best_lag, delay, 0.011);

  const auto r = estimate_tde(frame_of({a, b, a}), make_mic_pair(wide(), 0, 1), 343.0);
  EXPECT_NEAR(r.tau * kFs, best_lag, 0.2);
}

TEST(EstimateTde, Antisymmetry) {
  const std::size_t n = 4000;
  std::mt19937_64 rng(4);
  const auto spec = oracle::bandlimited_spectrum(n, 0.25, rng);
  for (double delay : {-9.3, -2.5, 0.7, 5.25, 11.9}) {
    const auto f = frame_of({oracle::synthesize(spec, n, 0.0), oracle::synthesize(spec, n, delay),
                             oracle::synthesize(spec, n, 1.0)});
    const auto ab = estimate_tde(f, make_mic_pair(wide(), 0, 1), 343.0);
    const auto ba = estimate_tde(f, make_mic_pair(wide(), 1, 0), 343.0);
    EXPECT_NEAR(ab.tau, -ba.tau, 1e-9) << delay;
    EXPECT_NEAR(ab.tau * kFs, delay, 0.25) << delay;
  }
}

TEST(EstimateTde, LagBound) {
  // Unrelated channels: the peak can land anywhere in the search window but
  // never beyond d/v plus a sample.
  const ArrayGeometry g({{0, 0}, {0.2, 0}, {0, 0.2}}, 343.0);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto f = frame_of({noise(2000, 100 + s), noise(2000, 200 + s), noise(2000, 300 + s)});
    FrameCorrelator corr(f, max_lag_samples(g, kFs));
    for (const MicPair& p : enumerate_pairs(g)) {
      const auto r = corr.estimate(p, 343.0);
      EXPECT_LE(std::abs(r.tau), p.baseline / 343.0 + 1.0 / kFs + 1e-15);
    }
  }
}

TEST(EstimateTde, ShiftTheorem) {
  // A burst surrounded by silence, so shifting it inside the frame changes
  // nothing but its position.
  const auto burst = noise(2000, 5);
  const std::size_t d = 5;
  auto place = [&](std::size_t offset) {
    std::vector<double> a(4000, 0.0), b(4000, 0.0);
    std::copy(burst.begin(), burst.end(), a.begin() + static_cast<std::ptrdiff_t>(offset));
    std::copy(burst.begin(), burst.end(), b.begin() + static_cast<std::ptrdiff_t>(offset + d));
    return frame_of({a, b, a});
  };
  const auto pair = make_mic_pair(wide(), 0, 1);
  const double t0 = estimate_tde(place(500), pair, 343.0).tau;
  EXPECT_NEAR(t0 * kFs, 5.0, 1e-9);
  for (std::size_t s : {1u, 13u, 400u})
    EXPECT_NEAR(estimate_tde(place(500 + s), pair, 343.0).tau, t0, 1e-12);
}

TEST(EstimateTde, SilentChannel) {
  const auto x = noise(1000, 6);
  try {
    estimate_tde(frame_of({x, std::vector<double>(1000, 0.0), x}), make_mic_pair(wide(), 0, 1),
                 343.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSignal);
  }
}

TEST(EstimateTde, HannWindowAndWeightingHook) {
  const auto x = noise(4000 + 3, 7);
  std::vector<double> a(x.begin() + 3, x.end()), b(x.begin(), x.end() - 3);
  const auto pair = make_mic_pair(wide(), 0, 1);
  TdeOptions opt;
  opt.window = Window::Hann;
  EXPECT_NEAR(estimate_tde(frame_of({a, b, a}), pair, 343.0, opt).tau * kFs, 3.0, 0.5);
  int calls = 0;
  opt.cross_spectrum_weighting = [&](std::span<fft::Complex> s) {
    ++calls;
    for (auto& c : s) c = std::abs(c) > 0 ? c / std::abs(c) : c;  // phase transform
  };
  EXPECT_NEAR(estimate_tde(frame_of({a, b, a}), pair, 343.0, opt).tau * kFs, 3.0, 0.5);
  EXPECT_EQ(calls, 1);
}

}  // namespace
}  // namespace doa
