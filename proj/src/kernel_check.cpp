#include "motionbeat/kernel_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "motionbeat/align.hpp"
#include "motionbeat/rng.hpp"

namespace motionbeat {

namespace {

double rel_error(double a, double b) { return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-8); }

std::vector<double> random_simplex(Rng& rng, int n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double s = 0.0;
  for (double& v : p) {
    v = 0.05 + rng.uniform();
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

KernelCheckReport check_soft_dtw_gradients(int instances, std::uint64_t seed, double gamma) {
  constexpr double h = 1e-4;
  Rng rng(seed);
  KernelCheckReport report;
  const SoftDtwConfig cfg{gamma};
  for (int n = 0; n < instances; ++n) {
    std::vector<double> a(2 + rng.uniform_int(7)), b(2 + rng.uniform_int(7));
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);
    const AlignmentResult r = soft_dtw(a, b, cfg);
    for (int side = 0; side < 2; ++side) {
      std::vector<double>& x = side == 0 ? a : b;
      const std::vector<double>& g = side == 0 ? r.grad_a : r.grad_b;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double up = soft_dtw(a, b, cfg).value;
        x[i] = x0 - h;
        const double down = soft_dtw(a, b, cfg).value;
        x[i] = x0;
        report.max_rel_error = std::max(report.max_rel_error, rel_error(g[i], (up - down) / (2.0 * h)));
        ++report.checked;
      }
    }
  }
  return report;
}

KernelCheckReport check_emd_gradients(int instances, std::uint64_t seed) {
  constexpr double h = 1e-3;
  Rng rng(seed);
  KernelCheckReport report;
  int done = 0;
  while (done < instances) {
    const int n = 2 + static_cast<int>(rng.uniform_int(7));
    const std::vector<double> p = random_simplex(rng, n);
    const std::vector<double> q = random_simplex(rng, n);
    double cp = 0.0, cq = 0.0, gap = 1.0;
    for (int k = 0; k + 1 < n; ++k) {
      cp += p[static_cast<std::size_t>(k)];
      cq += q[static_cast<std::size_t>(k)];
      gap = std::min(gap, std::abs(cp - cq));
    }
    if (gap < 10.0 * h) continue;
    ++done;
    const AlignmentResult r = emd_1d(p, q);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        std::vector<double> up = p, down = p;
        up[static_cast<std::size_t>(i)] += h;
        up[static_cast<std::size_t>(j)] -= h;
        down[static_cast<std::size_t>(i)] -= h;
        down[static_cast<std::size_t>(j)] += h;
        const double fd = (emd_1d(up, q).value - emd_1d(down, q).value) / (2.0 * h);
        const double ad = r.grad_a[static_cast<std::size_t>(i)] - r.grad_a[static_cast<std::size_t>(j)];
        report.max_rel_error = std::max(report.max_rel_error, rel_error(ad, fd));
        ++report.checked;
      }
    }
  }
  return report;
}

}  // namespace motionbeat
