#pragma once

// Monte-Carlo study of the resolver's sensitivity to noisy pairwise bearings.
//
// Per iteration: a far-field source drawn uniformly by area in an annulus
// around the array origin; each pair's true direction from its midpoint,
// perturbed by zero-mean Gaussian noise of standard deviation
// sigma ~ U[0, sigma_max) and wrapped; the perturbed value and its mirror
// across the pair axis as candidates; kappa ~ U[kappa_low, kappa_high).
//
// Iteration i draws from its own generator seeded by (seed, i), so records
// do not depend on how iterations are scheduled over threads.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "doa/angles.hpp"
#include "doa/errors.hpp"
#include "doa/geometry.hpp"
#include "doa/kde.hpp"
#include "doa/parallel.hpp"
#include "doa/resolver.hpp"

namespace doa {

struct SimConfig {
  ArrayGeometry geometry = ArrayGeometry::circular(6, 0.2, 343.0);
  std::size_t iterations = 10000;
  double r_min = 10.0;     // meters
  double r_max = 1000.0;   // meters
  double sigma_max = deg_to_rad(45.0);
  double kappa_low = 0.1;
  double kappa_high = 100.0;
  std::size_t bins = 512;
  bool refine_secondary_peaks = true;  // see KdeParams
  std::uint64_t seed = 42;
  unsigned threads = 1;  // 0 = hardware concurrency

  void validate() const {
    if (!(r_min > 0.0) || !(r_min < r_max))
      throw Error(ErrorCode::InvalidArgument, "annulus needs 0 < r_min < r_max");
    if (!(sigma_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_max must be positive");
    if (!(kappa_low > 0.0) || !(kappa_low < kappa_high))
      throw Error(ErrorCode::InvalidArgument, "kappa range needs 0 < low < high");
    if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 1");
    KdeParams{kappa_low, bins}.validate();
  }
};

struct SimRecord {
  std::size_t iteration = 0;
  double true_doa = 0.0;      // radians, from the array origin
  double source_range = 0.0;  // meters
  double sigma = 0.0;         // radians
  double kappa = 0.0;
  DoaEstimate estimate;
  double output_error = 0.0;  // radians, [0, pi]
  bool ok = true;
  std::string failure;        // resolver error message when !ok
};

/// Generator for iteration `iteration` of a run seeded with `seed`.
inline std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration),
                    static_cast<std::uint32_t>(iteration >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

/// Uniform-by-area radius in [r_min, r_max).
template <typename Rng>
double sample_annulus_radius(Rng& rng, double r_min, double r_max) {
  std::uniform_real_distribution<double> u(r_min * r_min, r_max * r_max);
  return std::sqrt(u(rng));
}

inline SimRecord simulate_iteration(const SimConfig& config, const std::vector<MicPair>& pairs,
                                    std::size_t iteration) {
  auto rng = iteration_rng(config.seed, iteration);
  SimRecord rec;
  rec.iteration = iteration;
  rec.source_range = sample_annulus_radius(rng, config.r_min, config.r_max);
  rec.true_doa = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
  rec.true_doa = wrap_two_pi(rec.true_doa);
  const Vec2 source{rec.source_range * std::cos(rec.true_doa),
                    rec.source_range * std::sin(rec.true_doa)};
  rec.sigma = std::uniform_real_distribution<double>(0.0, config.sigma_max)(rng);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<AmbiguousBearing> bearings;
  bearings.reserve(pairs.size());
  for (const MicPair& pair : pairs) {
    const double phi = wrap_two_pi(true_doa(pair.midpoint, source) + rec.sigma * noise(rng));
    bearings.push_back({pair, phi, mirror_across_axis(phi, pair.axis_angle)});
  }
  rec.kappa = std::uniform_real_distribution<double>(config.kappa_low, config.kappa_high)(rng);

  KdeParams params;
  params.kappa = rec.kappa;
  params.bins = config.bins;
  params.refine_secondary_peaks = config.refine_secondary_peaks;
  try {
    rec.estimate = resolve(bearings, params);
    rec.output_error = wrapped_distance(rec.estimate.phi_hat, rec.true_doa);
  } catch (const Error& e) {
    rec.ok = false;
    rec.failure = e.what();
  }
  return rec;
}

inline std::vector<SimRecord> run_simulation(const SimConfig& config) {
  config.validate();
  const auto pairs = enumerate_pairs(config.geometry);
  std::vector<SimRecord> records(config.iterations);
  parallel_for(config.iterations, resolve_thread_count(config.threads),
               [&](std::size_t i, unsigned) { records[i] = simulate_iteration(config, pairs, i); });
  return records;
}

// ---------------------------------------------------------------------------
// Analysis

struct NoiseRatioFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_ci95 = 0.0;      // half-width
  double intercept_ci95 = 0.0;  // half-width
  std::size_t samples = 0;
};

inline constexpr std::size_t kMinAnalysisRecords = 1000;

namespace detail {
inline std::vector<const SimRecord*> usable(const std::vector<SimRecord>& records) {
  std::vector<const SimRecord*> out;
  for (const auto& r : records)
    if (r.ok) out.push_back(&r);
  if (out.size() < kMinAnalysisRecords)
    throw Error(ErrorCode::InsufficientData,
                std::to_string(out.size()) + " usable records, need " +
                    std::to_string(kMinAnalysisRecords));
  return out;
}
}  // namespace detail

/// Ordinary least squares of output_error on sigma over the successful
/// records. Confidence half-widths use the normal quantile 1.96, adequate for
/// the >= 1000 samples required.
inline NoiseRatioFit analyze_noise_ratio(const std::vector<SimRecord>& records) {
  const auto rows = detail::usable(records);
  const double n = static_cast<double>(rows.size());
  double mx = 0.0, my = 0.0;
  for (const auto* r : rows) {
    mx += r->sigma;
    my += r->output_error;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto* r : rows) {
    sxx += (r->sigma - mx) * (r->sigma - mx);
    sxy += (r->sigma - mx) * (r->output_error - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::InsufficientData, "sigma does not vary");
  NoiseRatioFit fit;
  fit.samples = rows.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (const auto* r : rows) {
    const double e = r->output_error - (fit.intercept + fit.slope * r->sigma);
    sse += e * e;
  }
  const double s2 = sse / (n - 2.0);
  fit.slope_ci95 = 1.96 * std::sqrt(s2 / sxx);
  fit.intercept_ci95 = 1.96 * std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  return fit;
}

/// Pearson correlation; 0 when either variable has zero variance.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct IndependenceReport {
  double corr_range = 0.0;
  double corr_true_doa = 0.0;
  double corr_kappa = 0.0;
};

/// Pearson correlation of output_error with source range, true DOA and kappa.
inline IndependenceReport analyze_independence(const std::vector<SimRecord>& records) {
  const auto rows = detail::usable(records);
  std::vector<double> err, range, doa, kappa;
  for (const auto* r : rows) {
    err.push_back(r->output_error);
    range.push_back(r->source_range);
    doa.push_back(r->true_doa);
    kappa.push_back(r->kappa);
  }
  return {pearson(range, err), pearson(doa, err), pearson(kappa, err)};
}

}  // namespace doa
