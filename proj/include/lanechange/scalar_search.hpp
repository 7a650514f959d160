#pragma once

#include <functional>
#include <vector>

namespace lanechange {

struct ScalarSample {
  double x = 0.0;
  double f = 0.0;
};

struct ScalarSearchResult {
  double x = 0.0;
  double f = 0.0;  // +inf when no evaluated point was finite
  std::vector<ScalarSample> evaluations;
};

/// Golden-section search on [a, b]. Infinite values mark infeasible points; when both probes
/// are infinite the bracket shrinks towards `anchor`. Returns the best evaluated point
/// (ties go to the smaller x), including the bracket ends.
ScalarSearchResult golden_section_minimize(const std::function<double(double)>& f, double a,
                                           double b, double x_tol, int max_iterations,
                                           double anchor);

/// Uniform grid of `grid_points` over [lo, hi], then golden-section refinement on the two
/// cells around the best grid point.
ScalarSearchResult grid_then_golden(const std::function<double(double)>& f, double lo, double hi,
                                    int grid_points, double x_tol, int max_golden_iterations);

}  // namespace lanechange
