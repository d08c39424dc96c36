#ifndef HNOMA_ROOT_FINDING_HPP
#define HNOMA_ROOT_FINDING_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hnoma {

class NoBracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RootOptions {
  double x_tol = 1e-12;
  double f_tol = 1e-10;
  int max_iters = 400;
};

struct RootResult {
  double x;
  double fx;
  int iterations;
};

/// Bracketed root of a continuous function on [lo, hi] whose endpoint values
/// have opposite signs. False-position steps with the Illinois correction;
/// whenever a step fails to halve the bracket the next one bisects, using the
/// geometric midpoint while the bracket spans many decades above zero.
template <class F>
RootResult find_root(F&& f, double lo, double hi, const RootOptions& opt = {}) {
  if (!(lo < hi)) throw std::invalid_argument("find_root needs lo < hi");
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return {lo, flo, 0};
  if (fhi == 0.0) return {hi, fhi, 0};
  if (std::signbit(flo) == std::signbit(fhi) || std::isnan(flo) || std::isnan(fhi)) {
    throw NoBracketError("no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                         "]: f(lo) = " + std::to_string(flo) + ", f(hi) = " + std::to_string(fhi));
  }
  double best = std::abs(flo) < std::abs(fhi) ? lo : hi;
  double fbest = std::abs(flo) < std::abs(fhi) ? flo : fhi;
  bool bisect_next = false;
  int stale_side = 0;  // -1: last step moved lo, +1: last step moved hi
  for (int it = 1; it <= opt.max_iters; ++it) {
    const double width = hi - lo;
    double m;
    if (bisect_next) {
      m = (lo > 0.0 && hi > 16.0 * lo) ? std::sqrt(lo) * std::sqrt(hi) : lo + 0.5 * width;
    } else {
      m = hi - fhi * (hi - lo) / (fhi - flo);
      if (!(m > lo && m < hi)) m = lo + 0.5 * width;
    }
    const double fm = f(m);
    if (std::isnan(fm)) throw std::domain_error("find_root: function returned NaN");
    if (std::abs(fm) < std::abs(fbest)) {
      best = m;
      fbest = fm;
    }
    if (fm == 0.0) return {m, fm, it};
    if (std::signbit(fm) == std::signbit(flo)) {
      lo = m;
      flo = fm;
      if (stale_side == -1) fhi *= 0.5;
      stale_side = -1;
    } else {
      hi = m;
      fhi = fm;
      if (stale_side == 1) flo *= 0.5;
      stale_side = 1;
    }
    bisect_next = (hi - lo) > 0.5 * width;
    const double scale = std::max(1.0, std::abs(best));
    if ((hi - lo) <= opt.x_tol * scale && std::abs(fbest) <= opt.f_tol) return {best, fbest, it};
    if ((hi - lo) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) {
      return {best, fbest, it};
    }
  }
  return {best, fbest, opt.max_iters};
}

}  // namespace hnoma

#endif  // HNOMA_ROOT_FINDING_HPP
