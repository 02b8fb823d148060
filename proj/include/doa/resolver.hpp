#pragma once

// Resolves the mirror ambiguity of N pairwise bearings from one planar array.
//
// Each of the 2^N interpretations picks one candidate per pair. Its consensus
// direction is the mode of the von Mises density of the picked angles, and its
// error is the sum of wrapped distances from the picked angles to that mode.
// The interpretation with the smallest error wins; ties go to the lower index.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "doa/angles.hpp"
#include "doa/errors.hpp"
#include "doa/geometry.hpp"
#include "doa/kde.hpp"
#include "doa/parallel.hpp"

namespace doa {

inline constexpr std::size_t kDefaultMaxPairs = 24;

/// One choice of candidate per pair. Bit n of `index` set selects
/// phi_double_prime of pair n, clear selects phi_prime.
struct Interpretation {
  std::uint64_t index = 0;
  std::vector<double> angles;

  bool selects_double_prime(std::size_t n) const { return ((index >> n) & 1u) != 0; }
};

inline void fill_interpretation(std::span<const AmbiguousBearing> bearings, std::uint64_t mask,
                                std::span<double> out) {
  for (std::size_t n = 0; n < bearings.size(); ++n)
    out[n] = ((mask >> n) & 1u) ? bearings[n].phi_double_prime : bearings[n].phi_prime;
}

/// Lazy range over all 2^N interpretations in ascending mask order.
class InterpretationRange {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Interpretation;
    using difference_type = std::ptrdiff_t;
    using pointer = const Interpretation*;
    using reference = const Interpretation&;

    iterator() = default;
    iterator(std::span<const AmbiguousBearing> bearings, std::uint64_t mask)
        : bearings_(bearings), mask_(mask) {}

    Interpretation operator*() const {
      Interpretation out{mask_, std::vector<double>(bearings_.size())};
      fill_interpretation(bearings_, mask_, out.angles);
      return out;
    }
    iterator& operator++() {
      ++mask_;
      return *this;
    }
    iterator operator++(int) {
      iterator tmp = *this;
      ++mask_;
      return tmp;
    }
    friend bool operator==(const iterator& a, const iterator& b) { return a.mask_ == b.mask_; }

   private:
    std::span<const AmbiguousBearing> bearings_;
    std::uint64_t mask_ = 0;
  };

  InterpretationRange(std::span<const AmbiguousBearing> bearings,
                      std::size_t max_pairs = kDefaultMaxPairs)
      : bearings_(bearings) {
    if (bearings.empty()) throw Error(ErrorCode::TooFewPairs, "no bearings to interpret");
    if (bearings.size() > max_pairs || bearings.size() > 63)
      throw Error(ErrorCode::TooManyPairs, std::to_string(bearings.size()) +
                                               " pairs exceed the limit of " +
                                               std::to_string(max_pairs));
  }

  std::uint64_t size() const noexcept { return std::uint64_t{1} << bearings_.size(); }
  iterator begin() const { return {bearings_, 0}; }
  iterator end() const { return {bearings_, size()}; }

 private:
  std::span<const AmbiguousBearing> bearings_;
};

inline InterpretationRange enumerate_interpretations(std::span<const AmbiguousBearing> bearings,
                                                     std::size_t max_pairs = kDefaultMaxPairs) {
  return InterpretationRange(bearings, max_pairs);
}

/// Sum over n of the wrapped distance between angles[n] and phi_hat.
inline double interpretation_error(std::span<const double> angles, double phi_hat) {
  double err = 0.0;
  for (double a : angles) err += wrapped_distance(a, phi_hat);
  return err;
}

struct ResolverOptions {
  std::size_t max_pairs = kDefaultMaxPairs;
  // Skip interpretations whose error provably exceeds the incumbent. The
  // winner is identical to exhaustive scoring.
  bool prune = true;
  unsigned threads = 1;  // 0 = hardware concurrency
};

struct ResolveDiagnostics {
  std::uint64_t evaluated = 0;     // interpretations whose mode was computed
  std::uint64_t pruned = 0;        // skipped by the lower bound
  std::uint64_t nonconverged = 0;  // evaluated, mode search hit max_iterations
};

struct DoaEstimate {
  double phi_hat = 0.0;  // radians, [0, 2*pi)
  double error = 0.0;    // radians, sum of residuals
  std::uint64_t winner = 0;
  std::vector<double> per_pair_residuals;  // each in [0, pi]
  bool converged = true;
  ResolveDiagnostics diagnostics;
};

namespace detail {

struct Score {
  double error = std::numeric_limits<double>::infinity();
  std::uint64_t index = std::numeric_limits<std::uint64_t>::max();
  double phi = 0.0;
  bool converged = true;

  bool better_than(const Score& other) const {
    return error < other.error || (error == other.error && index < other.index);
  }
};

struct ChunkResult {
  Score best;
  ResolveDiagnostics diagnostics;
};

class InterpretationScorer {
 public:
  InterpretationScorer(std::span<const AmbiguousBearing> bearings,
                       std::shared_ptr<const SmoothingKernel> kernel, const KdeParams& params)
      : bearings_(bearings), finder_(std::move(kernel), params), angles_(bearings.size()) {}

  Score score(std::uint64_t mask, ResolveDiagnostics& diag) {
    fill_interpretation(bearings_, mask, angles_);
    const ModeResult mode = finder_.find_mode(angles_);
    ++diag.evaluated;
    if (!mode.converged) ++diag.nonconverged;
    return {interpretation_error(angles_, mode.phi), mask, mode.phi, mode.converged};
  }

 private:
  std::span<const AmbiguousBearing> bearings_;
  ModeFinder finder_;
  std::vector<double> angles_;
};

// Lower bound on the error of an interpretation: for any phi,
// sum_n dist(a_n, phi) >= min_k sum_n dist(a_n, a_k), because that function
// of phi is piecewise linear and its only convex kinks sit at the data.
// Row sums are maintained incrementally while walking a Gray code.
class GrayLowerBound {
 public:
  explicit GrayLowerBound(std::span<const AmbiguousBearing> bearings)
      : n_(bearings.size()), dist_(4 * n_ * n_), sel_(n_, 0), rows_(n_, 0.0) {
    for (std::size_t a = 0; a < 2 * n_; ++a)
      for (std::size_t b = 0; b < 2 * n_; ++b)
        dist_[a * 2 * n_ + b] = wrapped_distance(candidate(bearings, a), candidate(bearings, b));
  }

  void reset(std::uint64_t mask) {
    for (std::size_t n = 0; n < n_; ++n) sel_[n] = static_cast<unsigned>((mask >> n) & 1u);
    for (std::size_t k = 0; k < n_; ++k) {
      double s = 0.0;
      for (std::size_t n = 0; n < n_; ++n) s += d(n, sel_[n], k, sel_[k]);
      rows_[k] = s;
    }
  }

  void flip(std::size_t m) {
    const unsigned old_sel = sel_[m], new_sel = old_sel ^ 1u;
    double row_m = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      if (k == m) continue;
      rows_[k] += d(m, new_sel, k, sel_[k]) - d(m, old_sel, k, sel_[k]);
      row_m += d(k, sel_[k], m, new_sel);
    }
    rows_[m] = row_m;
    sel_[m] = new_sel;
  }

  double bound() const { return *std::min_element(rows_.begin(), rows_.end()); }

 private:
  static double candidate(std::span<const AmbiguousBearing> bearings, std::size_t a) {
    const auto& b = bearings[a / 2];
    return (a % 2) ? b.phi_double_prime : b.phi_prime;
  }
  double d(std::size_t n, unsigned s, std::size_t k, unsigned t) const {
    return dist_[(2 * n + s) * 2 * n_ + (2 * k + t)];
  }

  std::size_t n_;
  std::vector<double> dist_;
  std::vector<unsigned> sel_;
  std::vector<double> rows_;
};

// For each candidate angle used as an anchor, the interpretation choosing
// the candidate nearer the anchor in every pair. Sorted, unique.
inline std::vector<std::uint64_t> anchored_masks(std::span<const AmbiguousBearing> bearings) {
  std::vector<std::uint64_t> masks;
  for (const auto& anchor_bearing : bearings) {
    for (double anchor : {anchor_bearing.phi_prime, anchor_bearing.phi_double_prime}) {
      std::uint64_t mask = 0;
      for (std::size_t n = 0; n < bearings.size(); ++n)
        if (wrapped_distance(bearings[n].phi_double_prime, anchor) <
            wrapped_distance(bearings[n].phi_prime, anchor))
          mask |= std::uint64_t{1} << n;
      masks.push_back(mask);
    }
  }
  std::sort(masks.begin(), masks.end());
  masks.erase(std::unique(masks.begin(), masks.end()), masks.end());
  return masks;
}

inline void accumulate(ResolveDiagnostics& into, const ResolveDiagnostics& from) {
  into.evaluated += from.evaluated;
  into.pruned += from.pruned;
  into.nonconverged += from.nonconverged;
}

}  // namespace detail

/// Picks the interpretation with the smallest consensus error.
///
/// Deterministic for fixed inputs: chunk results are reduced by (error,
/// index) independent of thread scheduling, and pruning only discards
/// interpretations that cannot win.
inline DoaEstimate resolve(std::span<const AmbiguousBearing> bearings, const KdeParams& params,
                           const ResolverOptions& options = {}) {
  params.validate();
  if (bearings.size() < 2)
    throw Error(ErrorCode::TooFewPairs, "a single pair is irreducibly ambiguous");
  const InterpretationRange range(bearings, options.max_pairs);
  const std::size_t n = bearings.size();
  const std::uint64_t total = range.size();

  const auto kernel = std::make_shared<const SmoothingKernel>(params.kappa, params.bins);
  const unsigned threads = resolve_thread_count(options.threads);
  std::vector<std::optional<detail::InterpretationScorer>> scorers(threads);
  auto scorer_for = [&](unsigned worker) -> detail::InterpretationScorer& {
    if (!scorers[worker]) scorers[worker].emplace(bearings, kernel, params);
    return *scorers[worker];
  };

  const std::size_t low_bits = std::min<std::size_t>(n, 12);
  const std::uint64_t chunk_size = std::uint64_t{1} << low_bits;
  const std::size_t chunks = static_cast<std::size_t>(total >> low_bits);
  std::vector<detail::ChunkResult> results(chunks);

  detail::Score incumbent;
  ResolveDiagnostics diagnostics;
  if (options.prune) {
    for (std::uint64_t mask : detail::anchored_masks(bearings)) {
      const detail::Score s = scorer_for(0).score(mask, diagnostics);
      if (s.better_than(incumbent)) incumbent = s;
    }
  }

  // Absolute slack covering rounding in the incremental row sums.
  constexpr double kPruneMargin = 1e-9;

  parallel_for(chunks, threads, [&](std::size_t chunk, unsigned worker) {
    auto& scorer = scorer_for(worker);
    detail::ChunkResult& out = results[chunk];
    const std::uint64_t base = static_cast<std::uint64_t>(chunk) << low_bits;
    if (!options.prune) {
      for (std::uint64_t i = 0; i < chunk_size; ++i) {
        const detail::Score s = scorer.score(base | i, out.diagnostics);
        if (s.better_than(out.best)) out.best = s;
      }
      return;
    }
    detail::GrayLowerBound bound(bearings);
    double threshold = incumbent.error + kPruneMargin;
    for (std::uint64_t i = 0; i < chunk_size; ++i) {
      const std::uint64_t gray = i ^ (i >> 1);
      if (i == 0)
        bound.reset(base);
      else
        bound.flip(static_cast<std::size_t>(std::countr_zero(i)));
      if (bound.bound() > threshold) {
        ++out.diagnostics.pruned;
        continue;
      }
      const detail::Score s = scorer.score(base | gray, out.diagnostics);
      if (s.better_than(out.best)) {
        out.best = s;
        threshold = std::min(threshold, s.error + kPruneMargin);
      }
    }
  });

  detail::Score winner = incumbent;
  for (const auto& r : results) {
    detail::accumulate(diagnostics, r.diagnostics);
    if (r.best.better_than(winner)) winner = r.best;
  }

  DoaEstimate est;
  est.phi_hat = winner.phi;
  est.error = winner.error;
  est.winner = winner.index;
  est.converged = winner.converged;
  est.diagnostics = diagnostics;
  std::vector<double> angles(n);
  fill_interpretation(bearings, winner.index, angles);
  est.per_pair_residuals.reserve(n);
  for (double a : angles) est.per_pair_residuals.push_back(wrapped_distance(a, winner.phi));
  return est;
}

}  // namespace doa
