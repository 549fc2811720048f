#pragma once

// Reference computations used only by tests. Each one takes a different route
// from the library code it checks: dense normal equations instead of QR, a
// continued-fraction incomplete beta instead of Boost.Math, full sorts instead
// of selection, exhaustive search instead of iteration.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;  // row-major, rows of equal length

/// Gauss-Jordan inverse with partial pivoting.
inline Matrix invert(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) throw std::runtime_error("oracle: singular matrix");
    std::swap(a[piv], a[col]);
    std::swap(inv[piv], inv[col]);
    const double d = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

/// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double betacf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h;
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * betacf(a, b, x) / a;
  return 1.0 - std::exp(log_front) * betacf(b, a, 1.0 - x) / b;
}

/// P(|T| > |t|) for Student's t with `df` degrees of freedom.
inline double t_two_sided_p(double t, double df) { return incomplete_beta(df / 2.0, 0.5, df / (df + t * t)); }

struct OlsOracle {
  std::vector<double> beta, se, t, p;
  double r_squared = 0.0;
};

/// beta = (X'X)^-1 X'y with textbook inference; `centered` selects the
/// centered R-squared (model with intercept).
inline OlsOracle ols(const Matrix& x, const std::vector<double>& y, bool centered) {
  const std::size_t n = x.size(), p = x.front().size();
  Matrix xtx(p, std::vector<double>(p, 0.0));
  std::vector<double> xty(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < p; ++a) {
      xty[a] += x[i][a] * y[i];
      for (std::size_t b = 0; b < p; ++b) xtx[a][b] += x[i][a] * x[i][b];
    }
  const auto inv = invert(xtx);
  OlsOracle o;
  o.beta.assign(p, 0.0);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) o.beta[a] += inv[a][b] * xty[b];
  double ssr = 0.0, ybar = 0.0, tss = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t a = 0; a < p; ++a) fit += x[i][a] * o.beta[a];
    ssr += (y[i] - fit) * (y[i] - fit);
    tss += centered ? (y[i] - ybar) * (y[i] - ybar) : y[i] * y[i];
  }
  const double df = static_cast<double>(n - p);
  const double s2 = ssr / df;
  for (std::size_t a = 0; a < p; ++a) {
    o.se.push_back(std::sqrt(s2 * inv[a][a]));
    o.t.push_back(o.beta[a] / o.se.back());
    o.p.push_back(t_two_sided_p(o.t.back(), df));
  }
  o.r_squared = 1.0 - ssr / tss;
  return o;
}

/// Type-7 quantile through a full sort.
inline double sorted_index_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Largest set of (user, item) edges such that, restricted to the chosen users
/// and items, every chosen user and item has >= k edges. Exhaustive over all
/// user and item subsets; `edges` holds (user, item) pairs with ids < 16.
inline std::set<std::pair<int, int>> maximal_k_core(const std::vector<std::pair<int, int>>& edges, int num_users,
                                                    int num_items, std::size_t k) {
  std::set<std::pair<int, int>> best;
  for (unsigned um = 0; um < (1u << num_users); ++um)
    for (unsigned im = 0; im < (1u << num_items); ++im) {
      std::vector<std::size_t> ucount(num_users, 0), icount(num_items, 0);
      std::set<std::pair<int, int>> kept;
      for (const auto& [u, i] : edges)
        if ((um >> u & 1u) && (im >> i & 1u)) {
          ++ucount[u];
          ++icount[i];
          kept.insert({u, i});
        }
      bool ok = true;
      for (int u = 0; u < num_users; ++u)
        if ((um >> u & 1u) && ucount[u] < k) ok = false;
      for (int i = 0; i < num_items; ++i)
        if ((im >> i & 1u) && icount[i] < k) ok = false;
      if (ok && kept.size() > best.size()) best = kept;
    }
  return best;
}

}  // namespace oracle

namespace testutil {

/// Fresh per-test scratch directory under RATELAB_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* base = std::getenv("RATELAB_TEST_TMP");
  std::filesystem::path dir = base ? std::filesystem::path(base) : std::filesystem::temp_directory_path() / "ratelab_tests";
  dir /= name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
