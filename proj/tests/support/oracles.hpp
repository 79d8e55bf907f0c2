#pragma once

// Test-side reference implementations. Nothing here calls into the library's
// kernels, so agreement with the library is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline Vec central_diff(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-5) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Max over coordinates of |a-b| / max(|a|,|b|,floor/tol); <= tol passes.
inline bool grad_close(const Vec& a, const Vec& b, double rel = 1e-4, double abs_floor = 1e-7) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = std::abs(a[i] - b[i]);
    if (diff <= abs_floor) continue;
    if (diff > rel * std::max(std::abs(a[i]), std::abs(b[i]))) return false;
  }
  return true;
}

// Straight-line dense layer: y_o = sum_i W[o][i] x_i + b_o.
inline Vec dense(const std::vector<Vec>& w, const Vec& b, const Vec& x) {
  Vec y(b.size());
  for (std::size_t o = 0; o < b.size(); ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[o][i] * x[i];
    y[o] = s + b[o];
  }
  return y;
}

inline Vec softmax(const Vec& v) {
  double mx = *std::max_element(v.begin(), v.end());
  Vec e(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (e[i] = std::exp(v[i] - mx));
  for (auto& x : e) x /= s;
  return e;
}

inline double entropy(const Vec& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

inline double l1(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double l2(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Laplace expansion along the first row.
inline double cofactor_det(const std::vector<Vec>& m) {
  const std::size_t n = m.size();
  if (n == 0) return 1.0;
  if (n == 1) return m[0][0];
  double det = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<Vec> minor;
    for (std::size_t r = 1; r < n; ++r) {
      Vec row;
      for (std::size_t cc = 0; cc < n; ++cc)
        if (cc != c) row.push_back(m[r][cc]);
      minor.push_back(row);
    }
    det += ((c % 2 == 0) ? 1.0 : -1.0) * m[0][c] * cofactor_det(minor);
  }
  return det;
}

inline double dpp(const std::vector<Vec>& pts, bool use_l2 = true) {
  if (pts.size() <= 1) return 0.0;
  std::vector<Vec> k(pts.size(), Vec(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      k[i][j] = 1.0 / (1.0 + (use_l2 ? l2(pts[i], pts[j]) : l1(pts[i], pts[j])));
  return std::clamp(cofactor_det(k), 0.0, 1.0);
}

inline double apd(const std::vector<Vec>& pts, bool use_l2 = true) {
  if (pts.size() <= 1) return 0.0;
  double s = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      s += use_l2 ? l2(pts[i], pts[j]) : l1(pts[i], pts[j]);
      ++pairs;
    }
  return s / static_cast<double>(pairs);
}

inline double coverage(const std::vector<Vec>& pts, const Vec& x0) {
  double total = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    double up = -INFINITY, down = -INFINITY;
    for (const auto& p : pts) {
      up = std::max(up, p[i] - x0[i]);
      down = std::max(down, x0[i] - p[i]);
    }
    total += up + down;
  }
  return total / static_cast<double>(x0.size());
}

inline double prediction_coverage(const std::vector<Vec>& ys) {
  const std::size_t c = ys.front().size();
  double total = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    double m = 0.0;
    for (const auto& y : ys) m = std::max(m, y[i]);
    total += m;
  }
  return total / static_cast<double>(c);
}

inline double distinct_labels(const std::vector<int>& labels, std::size_t c) {
  return static_cast<double>(std::set<int>(labels.begin(), labels.end()).size()) / static_cast<double>(c);
}

inline double label_entropy(const std::vector<int>& labels, std::size_t c) {
  std::vector<double> counts(c, 0.0);
  for (int l : labels) counts[static_cast<std::size_t>(l)] += 1.0;
  double h = 0.0;
  for (double n : counts) {
    if (n == 0.0) continue;
    const double p = n / static_cast<double>(labels.size());
    h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(c));
}

inline Vec random_vec(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace oracle
