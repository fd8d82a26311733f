#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "morphocf/coverage.hpp"
#include "morphocf/distance.hpp"
#include "morphocf/errors.hpp"

namespace morphocf {

enum class Containment { outside_all, single, multiple };

struct Association {
  std::size_t ball_index = 0;
  Containment containment = Containment::outside_all;
};

// Negative inside the ball, zero on the surface, positive outside.
inline double signed_surface_distance(const std::vector<double>& x, const Ball& b,
                                      const DistanceSpec& spec) {
  return distance(x, b.center.values, spec) - b.radius;
}

// Maps a point to exactly one ball: its covering ball when unique, the most
// interior one (smallest signed surface distance) when several cover it, and
// the nearest center when none does. All ties resolve to the lowest index.
inline Association associate(const std::vector<double>& x, const std::vector<Ball>& balls,
                             const DistanceSpec& spec) {
  if (balls.empty()) throw EmptyCoverage("cannot associate against an empty coverage");

  std::size_t best_in = balls.size();
  double best_signed = std::numeric_limits<double>::infinity();
  std::size_t n_in = 0;
  std::size_t best_center = 0;
  double best_center_dist = std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < balls.size(); ++i) {
    const double d = distance(x, balls[i].center.values, spec);
    if (d < best_center_dist) {
      best_center_dist = d;
      best_center = i;
    }
    const double s = d - balls[i].radius;
    if (s < 0.0) {
      ++n_in;
      if (s < best_signed) {
        best_signed = s;
        best_in = i;
      }
    }
  }

  Association a;
  if (n_in == 0) {
    a.ball_index = best_center;
    a.containment = Containment::outside_all;
  } else {
    a.ball_index = best_in;
    a.containment = (n_in == 1) ? Containment::single : Containment::multiple;
  }
  return a;
}

inline Association associate(const EncodedInstance& x, const Coverage& cov) {
  return associate(x.values, cov.balls, cov.spec);
}

} // namespace morphocf
