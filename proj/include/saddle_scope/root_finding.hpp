#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace saddle {

struct RootOptions {
  std::size_t scan_points = 512;
  double f_tol = 1e-10;
  double x_tol = 1e-12;
  int max_iter = 200;
};

/// Bisection on [lo, hi] assuming f(lo) and f(hi) have opposite signs.
template <typename F>
double bisect(F&& f, double lo, double hi, double flo, const RootOptions& opt = {}) {
  for (int it = 0; it < opt.max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm) < opt.f_tol || hi - lo < opt.x_tol) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// All sign changes of f found on an evenly spaced pre-scan of [lo, hi], each
/// refined by bisection. Scan points where f is not finite (poles, the -inf
/// sentinel) are skipped; the point x = 0 is skipped when `skip_zero` is set.
template <typename F>
std::vector<double> scan_roots(F&& f, double lo, double hi, const RootOptions& opt = {},
                               bool skip_zero = true) {
  if (!(lo < hi)) throw std::invalid_argument("root bracket needs lo < hi");
  if (opt.scan_points < 2) throw std::invalid_argument("pre-scan needs at least 2 points");
  std::vector<double> roots;
  bool have_prev = false;
  double xp = 0.0, fp = 0.0;
  const double step = (hi - lo) / static_cast<double>(opt.scan_points - 1);
  for (std::size_t i = 0; i < opt.scan_points; ++i) {
    const double x = i + 1 == opt.scan_points ? hi : lo + step * static_cast<double>(i);
    if (skip_zero && x == 0.0) continue;
    const double fx = f(x);
    if (!std::isfinite(fx)) {
      have_prev = false;
      continue;
    }
    if (fx == 0.0) {
      roots.push_back(x);
      have_prev = false;
      continue;
    }
    if (have_prev && (fx < 0.0) != (fp < 0.0)) roots.push_back(bisect(f, xp, x, fp, opt));
    have_prev = true;
    xp = x;
    fp = fx;
  }
  return roots;
}

}  // namespace saddle
