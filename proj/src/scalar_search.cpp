#include "lanechange/scalar_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lanechange {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void keep_best(ScalarSearchResult& r, double x, double f) {
  r.evaluations.push_back({x, f});
  if (f < r.f || (f == r.f && x < r.x)) {
    r.x = x;
    r.f = f;
  }
}

}  // namespace

ScalarSearchResult golden_section_minimize(const std::function<double(double)>& f, double a,
                                           double b, double x_tol, int max_iterations,
                                           double anchor) {
  if (!(a <= b)) throw std::invalid_argument("golden_section_minimize: empty bracket");
  ScalarSearchResult r;
  r.x = a;
  r.f = kInf;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  keep_best(r, c, fc);
  keep_best(r, d, fd);
  for (int i = 0; i < max_iterations && (b - a) > x_tol; ++i) {
    bool go_left;
    if (std::isinf(fc) && std::isinf(fd)) {
      go_left = anchor <= c;
    } else {
      go_left = fc <= fd;
    }
    if (go_left) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
      keep_best(r, c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
      keep_best(r, d, fd);
    }
  }
  return r;
}

ScalarSearchResult grid_then_golden(const std::function<double(double)>& f, double lo, double hi,
                                    int grid_points, double x_tol, int max_golden_iterations) {
  if (!(lo <= hi) || grid_points < 2) {
    throw std::invalid_argument("grid_then_golden: need lo <= hi and at least two grid points");
  }
  ScalarSearchResult r;
  r.x = lo;
  r.f = kInf;
  const double h = (hi - lo) / (grid_points - 1);
  int best = -1;
  for (int i = 0; i < grid_points; ++i) {
    const double x = i + 1 == grid_points ? hi : lo + h * i;
    const double fx = f(x);
    const double before = r.f;
    keep_best(r, x, fx);
    if (r.f < before) best = i;
  }
  if (best < 0) return r;
  const double a = std::max(lo, r.x - h);
  const double b = std::min(hi, r.x + h);
  auto refined = golden_section_minimize(f, a, b, x_tol, max_golden_iterations, r.x);
  for (const auto& s : refined.evaluations) keep_best(r, s.x, s.f);
  return r;
}

}  // namespace lanechange
