#include "motionbeat/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "motionbeat/errors.hpp"

namespace motionbeat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_sequences(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("alignment requires non-empty sequences");
  for (double v : a) {
    if (!std::isfinite(v)) throw DomainError("alignment input contains NaN or infinity");
  }
  for (double v : b) {
    if (!std::isfinite(v)) throw DomainError("alignment input contains NaN or infinity");
  }
}

double soft_min3(double x, double y, double z, double gamma) {
  const double m = std::min({x, y, z});
  if (m == kInf) return kInf;
  const double s = std::exp(-(x - m) / gamma) + std::exp(-(y - m) / gamma) + std::exp(-(z - m) / gamma);
  return m - gamma * std::log(s);
}

}  // namespace

AlignmentResult soft_dtw(std::span<const double> a, std::span<const double> b, const SoftDtwConfig& cfg) {
  if (!(cfg.gamma > 0.0)) throw DomainError("soft_dtw gamma must be > 0, got " + std::to_string(cfg.gamma));
  check_sequences(a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t stride = m + 2;
  auto at = [stride](std::size_t i, std::size_t j) { return i * stride + j; };

  std::vector<double> D((n + 2) * stride, 0.0);
  std::vector<double> R((n + 2) * stride, kInf);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double d = a[i - 1] - b[j - 1];
      D[at(i, j)] = d * d;
    }
  }
  R[at(0, 0)] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      R[at(i, j)] = D[at(i, j)] + soft_min3(R[at(i - 1, j - 1)], R[at(i - 1, j)], R[at(i, j - 1)], cfg.gamma);
    }
  }

  AlignmentResult out;
  out.value = R[at(n, m)];

  // Backward pass: E(i,j) = d value / d R(i,j).
  std::vector<double> E((n + 2) * stride, 0.0);
  for (std::size_t i = 1; i <= n + 1; ++i) R[at(i, m + 1)] = -kInf;
  for (std::size_t j = 1; j <= m + 1; ++j) R[at(n + 1, j)] = -kInf;
  R[at(n + 1, m + 1)] = R[at(n, m)];
  E[at(n + 1, m + 1)] = 1.0;
  for (std::size_t i = n; i >= 1; --i) {
    for (std::size_t j = m; j >= 1; --j) {
      const double r = R[at(i, j)];
      const double wa = std::exp((R[at(i + 1, j)] - r - D[at(i + 1, j)]) / cfg.gamma);
      const double wb = std::exp((R[at(i, j + 1)] - r - D[at(i, j + 1)]) / cfg.gamma);
      const double wc = std::exp((R[at(i + 1, j + 1)] - r - D[at(i + 1, j + 1)]) / cfg.gamma);
      E[at(i, j)] = E[at(i + 1, j)] * wa + E[at(i, j + 1)] * wb + E[at(i + 1, j + 1)] * wc;
    }
  }

  out.grad_a.assign(n, 0.0);
  out.grad_b.assign(m, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double g = 2.0 * E[at(i, j)] * (a[i - 1] - b[j - 1]);
      out.grad_a[i - 1] += g;
      out.grad_b[j - 1] -= g;
    }
  }
  return out;
}

double hard_dtw_oracle(std::span<const double> a, std::span<const double> b) {
  check_sequences(a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<double> R((n + 1) * (m + 1), kInf);
  auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  R[at(0, 0)] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double d = a[i - 1] - b[j - 1];
      R[at(i, j)] = d * d + std::min({R[at(i - 1, j - 1)], R[at(i - 1, j)], R[at(i, j - 1)]});
    }
  }
  return R[at(n, m)];
}

namespace {

void enumerate_paths(std::span<const double> a, std::span<const double> b, std::size_t i, std::size_t j,
                     double cost, double& best) {
  const double d = a[i] - b[j];
  cost += d * d;
  if (i + 1 == a.size() && j + 1 == b.size()) {
    best = std::min(best, cost);
    return;
  }
  if (i + 1 < a.size() && j + 1 < b.size()) enumerate_paths(a, b, i + 1, j + 1, cost, best);
  if (i + 1 < a.size()) enumerate_paths(a, b, i + 1, j, cost, best);
  if (j + 1 < b.size()) enumerate_paths(a, b, i, j + 1, cost, best);
}

}  // namespace

double hard_dtw_enumerate(std::span<const double> a, std::span<const double> b) {
  check_sequences(a, b);
  if (a.size() > 12 || b.size() > 12) throw DomainError("path enumeration limited to length 12");
  double best = kInf;
  enumerate_paths(a, b, 0, 0, 0.0, best);
  return best;
}

namespace {

// Validates a histogram and returns it on the simplex together with its raw mass.
std::vector<double> to_simplex(std::span<const double> p, const char* name, double& mass) {
  mass = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string("emd: ") + name + " has a negative or non-finite entry");
    mass += v;
  }
  if (!(mass > 0.0)) throw DomainError(std::string("emd: ") + name + " has zero mass");
  std::vector<double> out(p.begin(), p.end());
  if (std::abs(mass - 1.0) > 1e-6) {
    for (double& v : out) v /= mass;
  } else {
    mass = 1.0;
  }
  return out;
}

}  // namespace

AlignmentResult emd_1d(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("emd: histograms differ in length");
  if (p.empty()) throw DomainError("emd: empty histograms");
  double mass_p = 1.0, mass_q = 1.0;
  const auto ps = to_simplex(p, "p", mass_p);
  const auto qs = to_simplex(q, "q", mass_q);
  const std::size_t B = ps.size();

  AlignmentResult out;
  std::vector<double> sign(B, 0.0);  // sign of CDF difference at cut k (between bins k-1 and k)
  double cp = 0.0, cq = 0.0;
  for (std::size_t k = 1; k < B; ++k) {
    cp += ps[k - 1];
    cq += qs[k - 1];
    const double diff = cp - cq;
    out.value += std::abs(diff);
    sign[k] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  }
  // d value / d p_i = sum of signs over cuts k > i.
  std::vector<double> gp(B, 0.0);
  double acc = 0.0;
  for (std::size_t i = B; i-- > 0;) {
    gp[i] = acc;
    acc += sign[i];
  }
  // chain through renormalization when it was applied
  auto chain = [](std::vector<double> g, const std::vector<double>& s, double mass) {
    if (mass == 1.0) return g;
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * s[i];
    for (double& v : g) v = (v - dot) / mass;
    return g;
  };
  std::vector<double> gq(B);
  for (std::size_t i = 0; i < B; ++i) gq[i] = -gp[i];
  out.grad_a = chain(std::move(gp), ps, mass_p);
  out.grad_b = chain(std::move(gq), qs, mass_q);
  return out;
}

double emd_oracle(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw ShapeError("emd_oracle: histograms must be non-empty and equal length");
  double mp = 0.0, mq = 0.0;
  std::vector<double> supply = to_simplex(p, "p", mp);
  std::vector<double> demand = to_simplex(q, "q", mq);
  std::size_t i = 0, j = 0;
  double cost = 0.0;
  while (i < supply.size() && j < demand.size()) {
    const double moved = std::min(supply[i], demand[j]);
    cost += moved * std::abs(static_cast<double>(i) - static_cast<double>(j));
    supply[i] -= moved;
    demand[j] -= moved;
    if (supply[i] <= demand[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return cost;
}

}  // namespace motionbeat
