#pragma once

// Least-squares source location from bearings taken at several sensor
// positions, and the exhaustive ambiguity-resolving triangulation over
// two-candidate nodes used as a baseline.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "doa/angles.hpp"
#include "doa/errors.hpp"
#include "doa/geometry.hpp"
#include "doa/parallel.hpp"

namespace doa {

struct Bearing {
  Vec2 position;       // sensor location q, meters
  double angle = 0.0;  // radians, wrapped to [0, 2*pi) on use
};

struct SourceLocation {
  Vec2 position;               // meters
  double residual_norm = 0.0;  // ||A p - b||, meters
  double condition_number = 0.0;
};

enum class RowForm {
  SinCos,   // sin(phi) px - cos(phi) py = sin(phi) qx - cos(phi) qy
  Tangent,  // -tan(phi) px + py = qy - qx tan(phi); singular at +-90 degrees
};

struct TriangulationOptions {
  RowForm row_form = RowForm::SinCos;
  double max_condition = 1e12;
};

/// Solves the bearing-line system by least squares (SVD).
inline SourceLocation triangulate(std::span<const Bearing> bearings,
                                  const TriangulationOptions& options = {}) {
  if (bearings.size() < 2)
    throw Error(ErrorCode::InvalidArgument, "triangulation needs at least 2 bearings");
  const auto rows = static_cast<Eigen::Index>(bearings.size());
  Eigen::MatrixX2d a(rows, 2);
  Eigen::VectorXd b(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Bearing& br = bearings[static_cast<std::size_t>(i)];
    const double phi = wrap_two_pi(br.angle);
    if (options.row_form == RowForm::SinCos) {
      const double s = std::sin(phi), c = std::cos(phi);
      a(i, 0) = s;
      a(i, 1) = -c;
      b(i) = s * br.position.x - c * br.position.y;
    } else {
      const double t = std::tan(phi);
      a(i, 0) = -t;
      a(i, 1) = 1.0;
      b(i) = br.position.y - br.position.x * t;
    }
  }
  if (!a.allFinite() || !b.allFinite())
    throw Error(ErrorCode::DegenerateSystem, "non-finite row (tangent form at +-90 degrees?)");

  Eigen::JacobiSVD<Eigen::MatrixX2d> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
  if (!(cond <= options.max_condition))
    throw Error(ErrorCode::DegenerateSystem,
                "bearing lines are (nearly) parallel, condition " + std::to_string(cond));
  const Eigen::Vector2d p = svd.solve(b);

  SourceLocation out;
  out.position = {p(0), p(1)};
  out.residual_norm = (a * p - b).norm();
  out.condition_number = cond;
  return out;
}

/// Four-quadrant direction from sensor q to source p, in [0, 2*pi).
inline double bearing_to_source(Vec2 q, Vec2 p) { return true_doa(q, p); }

/// A sensor with two candidate directions to the source.
struct AmbiguousNode {
  Vec2 position;
  double phi_prime = 0.0;
  double phi_double_prime = 0.0;
};

struct OttoyResult {
  SourceLocation location;
  std::uint64_t mask = 0;  // bit n set: node n uses phi_double_prime
  double error = 0.0;      // sum of wrapped differences, radians
};

/// Triangulates every interpretation of the nodes' candidates, re-derives
/// each node's bearing to the estimate and keeps the interpretation with the
/// smallest summed wrapped difference. Degenerate interpretations score
/// infinity; ties go to the lowest mask.
inline OttoyResult ottoy_resolve(std::span<const AmbiguousNode> nodes,
                                 std::size_t max_nodes = 24, unsigned threads = 1,
                                 const TriangulationOptions& options = {}) {
  if (nodes.size() < 3)
    throw Error(ErrorCode::InvalidArgument, "ambiguity-resolving triangulation needs 3+ nodes");
  if (nodes.size() > max_nodes || nodes.size() > 63)
    throw Error(ErrorCode::TooManyPairs, std::to_string(nodes.size()) + " nodes exceed the limit");
  const std::size_t n = nodes.size();
  const std::uint64_t total = std::uint64_t{1} << n;

  struct Candidate {
    double error = std::numeric_limits<double>::infinity();
    std::uint64_t mask = std::numeric_limits<std::uint64_t>::max();
    SourceLocation location;
  };
  const std::size_t low_bits = std::min<std::size_t>(n, 10);
  const std::size_t chunks = static_cast<std::size_t>(total >> low_bits);
  std::vector<Candidate> best(chunks);

  parallel_for(chunks, resolve_thread_count(threads), [&](std::size_t chunk, unsigned) {
    std::vector<Bearing> bearings(n);
    Candidate& out = best[chunk];
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << low_bits); ++i) {
      const std::uint64_t mask = (static_cast<std::uint64_t>(chunk) << low_bits) | i;
      for (std::size_t k = 0; k < n; ++k)
        bearings[k] = {nodes[k].position,
                       ((mask >> k) & 1u) ? nodes[k].phi_double_prime : nodes[k].phi_prime};
      double error = 0.0;
      SourceLocation loc;
      try {
        loc = triangulate(bearings, options);
        for (std::size_t k = 0; k < n; ++k)
          error += wrapped_distance(bearings[k].angle, bearing_to_source(nodes[k].position,
                                                                         loc.position));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateSystem && e.code() != ErrorCode::DegenerateGeometry)
          throw;
        continue;
      }
      if (error < out.error) out = {error, mask, loc};
    }
  });

  Candidate winner;
  for (const auto& c : best)
    if (c.error < winner.error || (c.error == winner.error && c.mask < winner.mask)) winner = c;
  if (!std::isfinite(winner.error))
    throw Error(ErrorCode::AllDegenerate, "every interpretation is degenerate");
  return {winner.location, winner.mask, winner.error};
}

}  // namespace doa
