#pragma once

// Least squares with classical inference, percentile bootstrap of the
// between-user variance, and the small descriptive statistics around them.

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ratelab/env_model.hpp"
#include "ratelab/error.hpp"
#include "ratelab/random.hpp"

namespace ratelab {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw EmptyInputError("mean of empty input");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Sample variance, denominator n-1.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw DataError("sample variance needs at least 2 values");
  // exact zero for constant input, which the rounded mean would otherwise miss
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

/// Rescales to mean 0 and sample standard deviation 1.
inline std::vector<double> standardize(std::span<const double> column) {
  if (column.size() < 2) throw DegenerateError("standardize needs at least 2 values");
  const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
  if (!(*hi > *lo)) throw DegenerateError("cannot standardize a constant column");
  const double m = mean(column);
  const double sd = std::sqrt(sample_variance(column));
  std::vector<double> out(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) out[i] = (column[i] - m) / sd;
  return out;
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
  if (x.size() < 2) throw DataError("correlation needs at least 2 pairs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
  const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
  if (!(*xhi > *xlo) || !(*yhi > *ylo)) throw DegenerateError("correlation with a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct DesignMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd x;  // n x p
  Eigen::VectorXd y;  // n

  std::size_t rows() const noexcept { return static_cast<std::size_t>(x.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(x.cols()); }

  std::size_t column_index(std::string_view name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return j;
    throw DataError("design has no column '" + std::string(name) + "'");
  }

  void validate() const {
    if (names.size() != cols()) throw DataError("design: column name count does not match matrix width");
    if (static_cast<Eigen::Index>(rows()) != y.size()) throw DataError("design: response length does not match row count");
    if (cols() == 0) throw DataError("design has no columns");
    if (cols() > rows()) throw DataError("design has more columns than rows");
    if (std::set<std::string>(names.begin(), names.end()).size() != names.size())
      throw DataError("design: column names must be unique");
    if (!x.allFinite() || !y.allFinite()) throw DataError("design contains NaN or infinite entries");
  }
};

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double std_err = 0.0;
  double t = 0.0;
  double p_value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct RegressionResult {
  std::vector<Coefficient> coefficients;
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  double f_statistic = 0.0;
  std::size_t n_observations = 0;
  std::size_t df_model = 0;
  std::size_t df_resid = 0;
  bool has_constant = false;  // constant vector lies in the column span
  double ci_level = 0.95;

  const Coefficient& operator[](std::string_view name) const {
    for (const auto& c : coefficients)
      if (c.name == name) return c;
    throw DataError("regression has no coefficient '" + std::string(name) + "'");
  }
};

inline constexpr double rank_tolerance = 1e-10;

/// Throws SingularDesignError naming the columns involved in any exact linear
/// dependence (singular values below rank_tolerance * largest).
inline void check_full_rank(const DesignMatrix& d) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d.x, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  std::vector<Eigen::Index> null_dirs;
  for (Eigen::Index k = 0; k < d.x.cols(); ++k)
    if (k >= s.size() || !(s(k) > rank_tolerance * smax)) null_dirs.push_back(k);
  if (null_dirs.empty()) return;

  const auto& v = svd.matrixV();
  std::string names;
  for (Eigen::Index j = 0; j < v.rows(); ++j) {
    bool involved = false;
    for (auto k : null_dirs) involved = involved || std::abs(v(j, k)) > 1e-8;
    if (!involved) continue;
    if (!names.empty()) names += ", ";
    names += d.names[static_cast<std::size_t>(j)];
  }
  throw SingularDesignError("singular design (rank " + std::to_string(d.x.cols() - static_cast<Eigen::Index>(null_dirs.size())) +
                            " < " + std::to_string(d.x.cols()) + "); linearly dependent columns: " + names);
}

/// Ordinary least squares through a Householder QR factorization, with
/// homoskedastic standard errors, two-sided t tests and t-based intervals.
/// R-squared is centered when the constant lies in the column span (as with a
/// full set of group dummies) and uncentered otherwise.
inline RegressionResult ols(const DesignMatrix& design, double ci_level = 0.95) {
  design.validate();
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  if (design.rows() <= design.cols()) throw DataError("OLS needs more rows than columns for residual degrees of freedom");
  check_full_rank(design);

  const auto n = design.x.rows();
  const auto p = design.x.cols();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(design.x);
  const Eigen::VectorXd beta = qr.solve(design.y);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov_unscaled = r_inv * r_inv.transpose();

  const Eigen::VectorXd resid = design.y - design.x * beta;
  const double ssr = resid.squaredNorm();

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd ones_resid = ones - design.x * qr.solve(ones);
  const bool has_constant = ones_resid.norm() < 1e-8 * std::sqrt(static_cast<double>(n));

  RegressionResult res;
  res.n_observations = static_cast<std::size_t>(n);
  res.has_constant = has_constant;
  res.ci_level = ci_level;
  res.df_resid = static_cast<std::size_t>(n - p);
  res.df_model = static_cast<std::size_t>(p) - (has_constant ? 1 : 0);

  const double tss = has_constant ? (design.y.array() - design.y.mean()).square().sum() : design.y.squaredNorm();
  if (!(tss > 0.0)) throw DegenerateError("response has no variation to explain");
  const double df_resid = static_cast<double>(res.df_resid);
  res.r_squared = std::clamp(1.0 - ssr / tss, 0.0, 1.0);
  res.adj_r_squared = 1.0 - static_cast<double>(n - (has_constant ? 1 : 0)) / df_resid * (1.0 - res.r_squared);
  res.f_statistic = res.df_model > 0 ? ((tss - ssr) / static_cast<double>(res.df_model)) / (ssr / df_resid)
                                     : std::numeric_limits<double>::quiet_NaN();

  const double sigma2 = ssr / df_resid;
  const boost::math::students_t dist(df_resid);
  const double q = boost::math::quantile(boost::math::complement(dist, (1.0 - ci_level) / 2.0));
  res.coefficients.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    Coefficient c;
    c.name = design.names[static_cast<std::size_t>(j)];
    c.estimate = beta(j);
    c.std_err = std::sqrt(sigma2 * cov_unscaled(j, j));
    if (c.std_err > 0.0) {
      c.t = c.estimate / c.std_err;
      c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(c.t)));
    } else {  // exact fit
      c.t = c.estimate == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), c.estimate);
      c.p_value = c.estimate == 0.0 ? 1.0 : 0.0;
    }
    c.ci_low = c.estimate - q * c.std_err;
    c.ci_high = c.estimate + q * c.std_err;
    res.coefficients.push_back(std::move(c));
  }
  return res;
}

struct BootstrapCI {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_resamples = 0;
  double level = 0.95;

  double half_width() const noexcept { return 0.5 * (ci_high - ci_low); }
};

inline constexpr std::size_t min_bootstrap_resamples = 1000;

/// Type-7 quantile of an already sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw EmptyInputError("quantile of empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Bootstrap replicates of the sample variance, resampling users with
/// replacement. Replicate b draws from substream (seed, "bootstrap", b), so the
/// result does not depend on `threads`.
inline std::vector<double> bootstrap_variance_replicates(std::span<const double> user_means, std::size_t n_resamples,
                                                         std::uint64_t seed, unsigned threads = 1) {
  std::vector<double> reps(n_resamples);
  const std::size_t n = user_means.size();
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> draw(n);
    for (std::size_t b = begin; b < end; ++b) {
      Rng rng = substream(seed, "bootstrap", b);
      for (auto& v : draw) v = user_means[uniform_index(rng, n)];
      reps[b] = sample_variance(draw);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n_resamples))));
  if (threads == 1) {
    work(0, n_resamples);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n_resamples + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b0 = std::min(n_resamples, t * chunk);
      const std::size_t b1 = std::min(n_resamples, b0 + chunk);
      pool.emplace_back(work, b0, b1);
    }
  }
  return reps;
}

/// Point estimate: sample variance of the user means. Interval: percentile
/// bootstrap over users.
inline BootstrapCI user_bootstrap_variance(std::span<const double> user_means, std::size_t n_resamples, double level,
                                           std::uint64_t seed, unsigned threads = 1) {
  if (user_means.size() < 2) throw DataError("insufficient data: variance bootstrap needs at least 2 users");
  if (n_resamples < min_bootstrap_resamples)
    throw ConfigError("bootstrap needs at least " + std::to_string(min_bootstrap_resamples) + " resamples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");

  auto reps = bootstrap_variance_replicates(user_means, n_resamples, seed, threads);
  std::sort(reps.begin(), reps.end());
  BootstrapCI ci;
  ci.point = sample_variance(user_means);
  ci.ci_low = sorted_quantile(reps, (1.0 - level) / 2.0);
  ci.ci_high = sorted_quantile(reps, (1.0 + level) / 2.0);
  ci.n_resamples = n_resamples;
  ci.level = level;
  return ci;
}

}  // namespace ratelab
