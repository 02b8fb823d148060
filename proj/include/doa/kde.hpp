#pragma once

// von Mises kernel density over a set of angles, and its mode.
//
// The density used for mode finding is the unnormalized sum
//
//   g(phi) = sum_n exp(kappa * cos(phi - phi_n))
//
// which has the same argmax as the normalized mixture. Internally the
// optimizer works on g(phi) * exp(-kappa) so that large concentrations do
// not overflow; that factor is independent of phi.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "doa/angles.hpp"
#include "doa/errors.hpp"
#include "doa/fft.hpp"

namespace doa {

// ---------------------------------------------------------------------------
// Modified Bessel function I0

/// I0(x) * exp(-x) for x >= 0. Power series up to x = 50, asymptotic above.
inline double bessel_i0_scaled(double x) {
  x = std::abs(x);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (x <= 50.0) {
    const double q = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 500; ++k) {
      term *= q / (static_cast<double>(k) * static_cast<double>(k));
      sum += term;
      if (term < eps * sum) break;
    }
    return sum * std::exp(-x);
  }
  // I0(x) ~ e^x / sqrt(2 pi x) * sum_k prod_{j<=k} (2j-1)^2 / (k! (8x)^k)
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * odd * odd / (static_cast<double>(k) * 8.0 * x);
    if (next > term) break;  // asymptotic series starts diverging
    term = next;
    sum += term;
    if (term < eps * sum) break;
  }
  return sum / std::sqrt(kTwoPi * x);
}

inline double bessel_i0(double x) { return bessel_i0_scaled(x) * std::exp(std::abs(x)); }

/// Normalized von Mises density exp(kappa cos(phi - mu)) / (2 pi I0(kappa)).
inline double von_mises_kernel(double phi, double mu, double kappa) {
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidArgument, "kappa must be positive");
  return std::exp(kappa * (std::cos(phi - mu) - 1.0)) / (kTwoPi * bessel_i0_scaled(kappa));
}

// ---------------------------------------------------------------------------
// Parameters and inputs

struct KdeParams {
  double kappa = 10.0;
  std::size_t bins = 512;
  double ncg_tolerance = 1e-9;  // radians
  int max_iterations = 100;
  // Also refine from the other smoothed-histogram peaks that could hide the
  // global maximum, given the binning error bound. false = single start.
  bool refine_secondary_peaks = true;

  void validate() const {
    if (!(kappa > 0.0) || !(kappa <= 1e4))
      throw Error(ErrorCode::InvalidArgument, "kappa must lie in (0, 1e4]");
    if (bins < 8 || (bins & (bins - 1)) != 0)
      throw Error(ErrorCode::InvalidArgument, "bins must be a power of two >= 8");
    if (!(ncg_tolerance > 0.0))
      throw Error(ErrorCode::InvalidArgument, "ncg_tolerance must be positive");
    if (max_iterations < 1)
      throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  }
};

/// Non-empty set of angles, each wrapped to [0, 2*pi).
class AngleSet {
 public:
  AngleSet(std::vector<double> angles) : angles_(std::move(angles)) {  // NOLINT
    if (angles_.empty()) throw Error(ErrorCode::InvalidArgument, "angle set is empty");
    for (double& a : angles_) {
      if (!std::isfinite(a)) throw Error(ErrorCode::InvalidArgument, "angle is not finite");
      a = wrap_two_pi(a);
    }
  }
  AngleSet(std::initializer_list<double> angles) : AngleSet(std::vector<double>(angles)) {}

  std::size_t size() const noexcept { return angles_.size(); }
  double operator[](std::size_t i) const noexcept { return angles_[i]; }
  std::span<const double> view() const noexcept { return angles_; }
  operator std::span<const double>() const noexcept { return angles_; }  // NOLINT
  const std::vector<double>& values() const noexcept { return angles_; }

 private:
  std::vector<double> angles_;
};

// ---------------------------------------------------------------------------
// Density and derivatives

inline double kde_value(double phi, std::span<const double> angles, double kappa) {
  double g = 0.0;
  for (double a : angles) g += std::exp(kappa * std::cos(phi - a));
  return g;
}

inline double kde_grad(double phi, std::span<const double> angles, double kappa) {
  double s = 0.0;
  for (double a : angles) s += std::sin(phi - a) * std::exp(kappa * std::cos(phi - a));
  return -kappa * s;
}

inline double kde_hess(double phi, std::span<const double> angles, double kappa) {
  double s = 0.0;
  for (double a : angles) {
    const double sn = std::sin(phi - a), cs = std::cos(phi - a);
    s += std::exp(kappa * cs) * (kappa * sn * sn - cs);
  }
  return kappa * s;
}

namespace detail {

// g, g', g'' all multiplied by exp(-kappa).
struct ScaledKde {
  double value = 0.0;
  double grad = 0.0;
  double hess = 0.0;
};

inline ScaledKde scaled_kde(double phi, std::span<const double> angles, double kappa) {
  ScaledKde out;
  double sg = 0.0, sh = 0.0;
  for (double a : angles) {
    const double sn = std::sin(phi - a), cs = std::cos(phi - a);
    const double e = std::exp(kappa * (cs - 1.0));
    out.value += e;
    sg += sn * e;
    sh += e * (kappa * sn * sn - cs);
  }
  out.grad = -kappa * sg;
  out.hess = kappa * sh;
  return out;
}

inline double scaled_kde_value(double phi, std::span<const double> angles, double kappa) {
  double g = 0.0;
  for (double a : angles) g += std::exp(kappa * (std::cos(phi - a) - 1.0));
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Histogram smoothing

/// Spectrum of the von Mises kernel sampled at bin-center offsets, for one
/// (kappa, bins). Immutable after construction and shareable across threads.
class SmoothingKernel {
 public:
  SmoothingKernel(double kappa, std::size_t bins)
      : kappa_(kappa), bins_(bins), plan_(fft::RealPlan::get(bins)), spectrum_(bins / 2 + 1) {
    fft::AlignedBuffer<double> samples(bins);
    const double h = kTwoPi / static_cast<double>(bins);
    for (std::size_t j = 0; j < bins; ++j)
      samples[j] = std::exp(kappa * (std::cos(h * static_cast<double>(j)) - 1.0));
    plan_->forward(samples.data(), spectrum_.data());
  }

  double kappa() const noexcept { return kappa_; }
  std::size_t bins() const noexcept { return bins_; }
  double bin_width() const noexcept { return kTwoPi / static_cast<double>(bins_); }
  const fft::RealPlan& plan() const noexcept { return *plan_; }
  std::span<const fft::Complex> spectrum() const noexcept { return spectrum_.span(); }

 private:
  double kappa_;
  std::size_t bins_;
  std::shared_ptr<const fft::RealPlan> plan_;
  fft::AlignedBuffer<fft::Complex> spectrum_;
};

/// Bin of an angle in [0, 2*pi); half-open bins, an edge goes to the higher bin.
inline std::size_t histogram_bin(double angle, std::size_t bins) {
  const double pos = wrap_two_pi(angle) * static_cast<double>(bins) / kTwoPi;
  const auto b = static_cast<std::size_t>(std::floor(pos));
  return std::min(b, bins - 1);
}

struct ModeResult {
  double phi = 0.0;      // refined mode, [0, 2*pi)
  double init = 0.0;     // histogram initialization (bin center)
  double value = 0.0;    // kde_value(phi) * exp(-kappa)
  int iterations = 0;
  bool converged = false;
};

/// Reusable workspace for histogram smoothing and mode refinement. One
/// instance per thread; the kernel may be shared.
class ModeFinder {
 public:
  ModeFinder(std::shared_ptr<const SmoothingKernel> kernel, KdeParams params)
      : kernel_(std::move(kernel)),
        params_(params),
        real_(kernel_->bins()),
        spectrum_(kernel_->bins() / 2 + 1) {
    params_.validate();
    if (params_.bins != kernel_->bins() || params_.kappa != kernel_->kappa())
      throw Error(ErrorCode::InvalidArgument, "kernel does not match parameters");
  }

  explicit ModeFinder(KdeParams params)
      : ModeFinder(std::make_shared<const SmoothingKernel>(params.kappa, params.bins), params) {}

  const KdeParams& params() const noexcept { return params_; }

  /// Histogram convolved with the sampled kernel, one value per bin center.
  std::span<const double> smooth(std::span<const double> angles) {
    const std::size_t bins = kernel_->bins();
    std::fill(real_.data(), real_.data() + bins, 0.0);
    for (double a : angles) real_[histogram_bin(a, bins)] += 1.0;
    const auto& plan = kernel_->plan();
    plan.forward(real_.data(), spectrum_.data());
    const auto k = kernel_->spectrum();
    const double scale = 1.0 / static_cast<double>(bins);
    for (std::size_t i = 0; i < spectrum_.size(); ++i) spectrum_[i] *= k[i] * scale;
    plan.inverse(spectrum_.data(), real_.data());
    return {real_.data(), bins};
  }

  /// Center of the argmax bin of the smoothed histogram (first on ties).
  double histogram_init(std::span<const double> angles) {
    const auto s = smooth(angles);
    const auto best = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    return bin_center(best);
  }

  /// Mode of the density: histogram initialization, then NCG refinement.
  ModeResult find_mode(std::span<const double> angles) {
    if (angles.empty()) throw Error(ErrorCode::InvalidArgument, "angle set is empty");
    const auto s = smooth(angles);
    const std::size_t bins = s.size();
    const auto primary =
        static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());

    starts_.clear();
    if (params_.refine_secondary_peaks) {
      // Binning moves each angle by at most h/2 and the argmax of g is at
      // most h/2 from a bin center; |d log g / d phi| <= kappa, so the bin
      // nearest the true mode keeps at least exp(-1.5 kappa h) of the max.
      const double floor_value = s[primary] * std::exp(-1.5 * params_.kappa * kernel_->bin_width());
      for (std::size_t b = 0; b < bins; ++b) {
        if (b == primary) continue;
        const double v = s[b];
        const double left = s[(b + bins - 1) % bins];
        const double right = s[(b + 1) % bins];
        if (v >= floor_value && v > left && v >= right) starts_.emplace_back(v, b);
      }
      std::sort(starts_.begin(), starts_.end(),
                [](const auto& x, const auto& y) {
                  return x.first != y.first ? x.first > y.first : x.second < y.second;
                });
      if (starts_.size() > kMaxSecondaryStarts) starts_.resize(kMaxSecondaryStarts);
    }

    ModeResult best = refine(angles, bin_center(primary));
    best.init = bin_center(primary);
    int total_iterations = best.iterations;
    for (const auto& [value, b] : starts_) {
      ModeResult r = refine(angles, bin_center(b));
      total_iterations += r.iterations;
      if (r.value > best.value * (1.0 + 1e-12)) {
        const double init = best.init;
        best = r;
        best.init = init;
      }
    }
    best.iterations = total_iterations;
    return best;
  }

  /// Nonlinear conjugate gradient (Polak-Ribiere, restarting) on -g from
  /// `start`, with a Newton-scaled backtracking line search.
  ModeResult refine(std::span<const double> angles, double start) const {
    const double kappa = params_.kappa;
    const double grad_tol =
        params_.ncg_tolerance * static_cast<double>(angles.size()) * kappa;
    const double fallback_step = kernel_->bin_width();
    constexpr double c1 = 1e-4;

    ModeResult out;
    double x = start;
    detail::ScaledKde k = detail::scaled_kde(x, angles, kappa);
    double f = -k.value, df = -k.grad, d2f = -k.hess;
    double dir = -df, df_prev = df;

    for (int it = 0; it < params_.max_iterations; ++it) {
      out.iterations = it;
      if (std::abs(df) <= grad_tol) {
        out.converged = true;
        break;
      }
      if (it > 0) {
        const double beta = std::max(0.0, df * (df - df_prev) / (df_prev * df_prev));
        dir = -df + beta * dir;
        if (dir * df >= 0.0) dir = -df;  // not a descent direction: restart
      }
      double alpha = d2f > 0.0 ? -df / (d2f * dir) : fallback_step / std::abs(dir);
      if (!(alpha > 0.0) || !std::isfinite(alpha)) alpha = fallback_step / std::abs(dir);
      alpha = std::min(alpha, 0.5 * kPi / std::abs(dir));

      bool accepted = false;
      double f_new = f;
      for (int bt = 0; bt < 60; ++bt) {
        f_new = -detail::scaled_kde_value(x + alpha * dir, angles, kappa);
        if (f_new <= f + c1 * alpha * df * dir) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // No decrease representable along the descent direction: x is a
        // maximum to working precision.
        out.converged = std::abs(alpha * dir) < params_.ncg_tolerance;
        break;
      }
      const double step = alpha * dir;
      x += step;
      df_prev = df;
      k = detail::scaled_kde(x, angles, kappa);
      f = -k.value;
      df = -k.grad;
      d2f = -k.hess;
      out.iterations = it + 1;
      if (std::abs(step) < params_.ncg_tolerance) {
        out.converged = true;
        break;
      }
    }
    out.phi = wrap_two_pi(x);
    out.value = detail::scaled_kde_value(out.phi, angles, kappa);
    out.init = wrap_two_pi(start);
    return out;
  }

 private:
  static constexpr std::size_t kMaxSecondaryStarts = 32;

  double bin_center(std::size_t b) const {
    return (static_cast<double>(b) + 0.5) * kernel_->bin_width();
  }

  std::shared_ptr<const SmoothingKernel> kernel_;
  KdeParams params_;
  fft::AlignedBuffer<double> real_;
  fft::AlignedBuffer<fft::Complex> spectrum_;
  std::vector<std::pair<double, std::size_t>> starts_;
};

/// Starting point for mode refinement: center of the argmax bin of the
/// kernel-smoothed histogram.
inline double histogram_init(const AngleSet& set, const KdeParams& params) {
  ModeFinder finder(params);
  return finder.histogram_init(set);
}

/// argmax of the density. A result with converged == false still holds the
/// best iterate found.
inline ModeResult find_mode(const AngleSet& set, const KdeParams& params) {
  ModeFinder finder(params);
  return finder.find_mode(set);
}

}  // namespace doa
