#include <gtest/gtest.h>

#include <random>

#include "doa/resolver.hpp"
#include "oracles.hpp"

namespace doa {
namespace {

// Candidates for every pair of `g` given noisy per-pair directions toward a
// far source at `phi`.
std::vector<AmbiguousBearing> noisy_bearings(const ArrayGeometry& g, double phi, double sigma,
                                             std::mt19937_64& rng, double range = 500.0) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const Vec2 src{range * std::cos(phi), range * std::sin(phi)};
  std::vector<AmbiguousBearing> out;
  for (const MicPair& p : enumerate_pairs(g)) {
    const double a = wrap_two_pi(true_doa(p.midpoint, src) + sigma * noise(rng));
    out.push_back({p, a, mirror_across_axis(a, p.axis_angle)});
  }
  return out;
}

std::vector<AmbiguousBearing> random_bearings(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, kTwoPi), ax(0.0, kPi);
  std::vector<AmbiguousBearing> out(n);
  for (auto& b : out) {
    b.pair.axis_angle = ax(rng);
    b.phi_prime = u(rng);
    b.phi_double_prime = mirror_across_axis(b.phi_prime, b.pair.axis_angle);
  }
  return out;
}

TEST(EnumerateInterpretations, Counts) {
  const auto pairs = enumerate_pairs(ArrayGeometry::circular(6, 0.2, 343.0));
  std::vector<AmbiguousBearing> bearings;
  for (const auto& p : pairs) bearings.push_back({p, 0.1, 0.2});
  const auto range = enumerate_interpretations(bearings);
  EXPECT_EQ(range.size(), 32768u);
  std::uint64_t count = 0;
  for (auto it = range.begin(); it != range.end(); ++it) ++count;
  EXPECT_EQ(count, 32768u);
}

TEST(EnumerateInterpretations, SmallCases) {
  std::vector<AmbiguousBearing> one{{MicPair{}, 1.0, 2.0}};
  std::vector<std::vector<double>> seen;
  for (const Interpretation& i : enumerate_interpretations(one)) seen.push_back(i.angles);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0], std::vector<double>{1.0});
  EXPECT_EQ(seen[1], std::vector<double>{2.0});

  std::vector<AmbiguousBearing> three{{MicPair{}, 0.0, 1.0}, {MicPair{}, 2.0, 3.0},
                                      {MicPair{}, 4.0, 5.0}};
  std::uint64_t expected = 0;
  for (const Interpretation& i : enumerate_interpretations(three)) {
    EXPECT_EQ(i.index, expected);
    for (std::size_t n = 0; n < 3; ++n) {
      EXPECT_EQ(i.selects_double_prime(n), ((expected >> n) & 1u) != 0);
      EXPECT_EQ(i.angles[n], 2.0 * static_cast<double>(n) + (i.selects_double_prime(n) ? 1 : 0));
    }
    ++expected;
  }
  EXPECT_EQ(expected, 8u);
}

TEST(EnumerateInterpretations, Limits) {
  std::vector<AmbiguousBearing> none;
  EXPECT_THROW(enumerate_interpretations(none), Error);
  std::mt19937_64 rng(1);
  const auto many = random_bearings(25, rng);
  try {
    enumerate_interpretations(many);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManyPairs);
  }
  EXPECT_NO_THROW(enumerate_interpretations(many, 30));
}

TEST(InterpretationError, Examples) {
  EXPECT_DOUBLE_EQ(interpretation_error(std::vector<double>(4, 1.5), 1.5), 0.0);
  EXPECT_NEAR(interpretation_error(std::vector<double>{0.0, kPi / 2}, kPi / 4), kPi / 2, 1e-15);
  EXPECT_NEAR(interpretation_error(std::vector<double>{deg_to_rad(350), deg_to_rad(10)}, 0.0),
              deg_to_rad(20), 1e-14);
}

TEST(Resolve, NoiseFreeSourceDueNorth) {
  const auto g = ArrayGeometry::circular(6, 0.2, 343.0);
  std::mt19937_64 rng(0);
  const auto bearings = noisy_bearings(g, kPi / 2, 0.0, rng);
  const auto est = resolve(bearings, KdeParams{});
  EXPECT_NEAR(rad_to_deg(est.phi_hat), 90.0, 0.01);
  // Pair midpoints see the source at slightly different angles (parallax up
  // to 0.2 m / 500 m per pair), so the consensus error is small, not zero.
  EXPECT_LT(est.error, 15 * 0.2 / 500.0);
  const Vec2 src{0.0, 500.0};
  for (std::size_t n = 0; n < bearings.size(); ++n) {
    const double chosen =
        ((est.winner >> n) & 1u) ? bearings[n].phi_double_prime : bearings[n].phi_prime;
    EXPECT_LT(wrapped_distance(chosen, true_doa(bearings[n].pair.midpoint, src)), 1e-12) << n;
    EXPECT_LE(est.per_pair_residuals[n], kPi);
  }
}

TEST(Resolve, ModerateNoiseStaysNearTruth) {
  const auto g = ArrayGeometry::circular(6, 0.2, 343.0);
  std::mt19937_64 rng(8);
  double total = 0.0;
  const int trials = 60;
  for (int t = 0; t < trials; ++t) {
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    const double phi = u(rng);
    const auto est = resolve(noisy_bearings(g, phi, deg_to_rad(10), rng), KdeParams{});
    total += wrapped_distance(est.phi_hat, phi);
  }
  EXPECT_LT(rad_to_deg(total / trials), 10.0 / 2.0);
}

TEST(Resolve, HandBuiltThreePairsMatchesExhaustiveOracle) {
  // Three clustered true candidates near 40 degrees with their mirrors, and
  // one pair whose labels are swapped.
  std::vector<AmbiguousBearing> b(3);
  const double axes[] = {0.3, 1.2, 2.6};
  const double truth[] = {deg_to_rad(40), deg_to_rad(43), deg_to_rad(38)};
  for (int n = 0; n < 3; ++n) {
    b[n].pair.axis_angle = axes[n];
    b[n].phi_prime = truth[n];
    b[n].phi_double_prime = mirror_across_axis(truth[n], axes[n]);
  }
  std::swap(b[1].phi_prime, b[1].phi_double_prime);
  const auto ref = oracle::exhaustive_resolve(b, 10.0, deg_to_rad(0.01));
  const auto est = resolve(b, KdeParams{});
  EXPECT_EQ(est.winner, 0b010u);
  EXPECT_EQ(est.winner, ref.mask);
  EXPECT_NEAR(est.phi_hat, ref.phi, 1e-6);
  EXPECT_NEAR(est.error, ref.error, 1e-6);
}

TEST(Resolve, MatchesExhaustiveOracleForSmallArrays) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, kTwoPi), sig(0.0, deg_to_rad(30));
  std::uniform_real_distribution<double> lk(std::log(0.5), std::log(100.0));
  int checked = 0;
  for (std::size_t m : {3u, 4u, 5u}) {
    const auto g = ArrayGeometry::circular(m, 0.2, 343.0, 0.1 * static_cast<double>(m));
    for (int t = 0; t < 6; ++t) {
      const auto bearings = noisy_bearings(g, u(rng), sig(rng), rng);
      KdeParams p;
      p.kappa = std::exp(lk(rng));
      const auto ref = oracle::exhaustive_resolve(bearings, p.kappa, deg_to_rad(0.05));
      // Ambiguous by construction when the two best scores are numerically tied.
      if (ref.runner_up_error - ref.error < 1e-6) continue;
      const auto est = resolve(bearings, p);
      EXPECT_EQ(est.winner, ref.mask) << "M=" << m << " t=" << t;
      EXPECT_NEAR(est.error, ref.error, 1e-6);
      ++checked;
    }
  }
  EXPECT_GE(checked, 15);
}

TEST(Resolve, PrunedEqualsExhaustive) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, kTwoPi), sig(0.0, deg_to_rad(45));
  std::uniform_real_distribution<double> kap(0.1, 100.0);
  const auto g = ArrayGeometry::circular(5, 0.2, 343.0);
  for (int t = 0; t < 40; ++t) {
    const auto bearings =
        t % 4 == 3 ? random_bearings(10, rng) : noisy_bearings(g, u(rng), sig(rng), rng);
    KdeParams p;
    p.kappa = kap(rng);
    ResolverOptions full;
    full.prune = false;
    const auto a = resolve(bearings, p, full);
    const auto b = resolve(bearings, p);
    EXPECT_EQ(a.winner, b.winner) << t;
    EXPECT_EQ(a.phi_hat, b.phi_hat);
    EXPECT_EQ(a.error, b.error);
    EXPECT_EQ(a.diagnostics.evaluated, 1024u);
    EXPECT_EQ(b.diagnostics.evaluated + b.diagnostics.pruned >= 1024u, true);
  }
}

TEST(Resolve, WinnerNoWorseThanAnyMask) {
  std::mt19937_64 rng(14);
  for (std::size_t n = 2; n <= 10; ++n) {
    const auto bearings = random_bearings(n, rng);
    const auto est = resolve(bearings, KdeParams{});
    ModeFinder finder(KdeParams{});
    std::vector<double> angles(n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      fill_interpretation(bearings, mask, angles);
      EXPECT_LE(est.error, interpretation_error(angles, finder.find_mode(angles).phi));
    }
  }
}

TEST(Resolve, MirrorConsistency) {
  std::mt19937_64 rng(15);
  const auto g = ArrayGeometry::circular(6, 0.2, 343.0);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int t = 0; t < 10; ++t) {
    auto bearings = noisy_bearings(g, u(rng), deg_to_rad(15), rng);
    const auto a = resolve(bearings, KdeParams{});
    std::uint64_t flipped = 0;
    for (std::size_t n = 0; n < bearings.size(); n += 2) {
      std::swap(bearings[n].phi_prime, bearings[n].phi_double_prime);
      flipped |= std::uint64_t{1} << n;
    }
    const auto b = resolve(bearings, KdeParams{});
    EXPECT_EQ(a.phi_hat, b.phi_hat);
    EXPECT_EQ(a.error, b.error);
    EXPECT_EQ(a.winner ^ flipped, b.winner);
  }
}

TEST(Resolve, RotationEquivariance) {
  std::mt19937_64 rng(16);
  const auto g = ArrayGeometry::circular(6, 0.2, 343.0);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int t = 0; t < 10; ++t) {
    auto bearings = noisy_bearings(g, u(rng), deg_to_rad(5), rng);
    const auto a = resolve(bearings, KdeParams{});
    const double theta = u(rng);
    for (auto& b : bearings) {
      b.phi_prime = wrap_two_pi(b.phi_prime + theta);
      b.phi_double_prime = wrap_two_pi(b.phi_double_prime + theta);
    }
    const auto b = resolve(bearings, KdeParams{});
    EXPECT_EQ(a.winner, b.winner);
    EXPECT_LT(wrapped_distance(wrap_two_pi(a.phi_hat + theta), b.phi_hat), 1e-7);
    EXPECT_NEAR(a.error, b.error, 1e-6);
  }
}

TEST(Resolve, DeterministicAcrossThreadCounts) {
  std::mt19937_64 rng(17);
  const auto g = ArrayGeometry::circular(6, 0.2, 343.0);
  for (int t = 0; t < 5; ++t) {
    const auto bearings = noisy_bearings(g, 1.0 + t, deg_to_rad(30), rng);
    KdeParams p;
    p.kappa = 40.0;
    for (bool prune : {true, false}) {
      ResolverOptions o1, o4;
      o1.prune = o4.prune = prune;
      o4.threads = 4;
      const auto a = resolve(bearings, p, o1);
      const auto b = resolve(bearings, p, o4);
      const auto c = resolve(bearings, p, o4);
      EXPECT_EQ(a.winner, b.winner);
      EXPECT_EQ(b.winner, c.winner);
      EXPECT_EQ(a.phi_hat, b.phi_hat);
    }
  }
}

TEST(Resolve, RejectsTooFewAndTooManyPairs) {
  std::mt19937_64 rng(18);
  try {
    resolve(random_bearings(1, rng), KdeParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewPairs);
  }
  ResolverOptions o;
  o.max_pairs = 8;
  try {
    resolve(random_bearings(9, rng), KdeParams{}, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManyPairs);
  }
}

}  // namespace
}  // namespace doa
