#pragma once

// Serialization of regression results and simulation outputs.

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include "ratelab/sim_loop.hpp"
#include "ratelab/stats_engine.hpp"
#include "ratelab/table.hpp"

namespace ratelab {

inline Table coefficient_table(const RegressionResult& res) {
  Table t{{"name", "coef", "std_err", "t", "p_value", "ci_low", "ci_high"}, {}};
  for (const auto& c : res.coefficients)
    t.add_row({c.name, format_real(c.estimate), format_real(c.std_err), format_real(c.t), format_real(c.p_value),
               format_real(c.ci_low), format_real(c.ci_high)});
  return t;
}

/// Fixed-width summary: fit statistics block, then one line per coefficient
/// with coef / std err / t / P>|t| and the interval bounds.
inline std::string format_regression_summary(const RegressionResult& res, const std::string& dep_variable) {
  std::ostringstream os;
  char buf[256];
  auto line = [&](const char* l, const std::string& lv, const char* r, const std::string& rv) {
    std::snprintf(buf, sizeof buf, "%-18s %20s   %-16s %10s\n", l, lv.c_str(), r, rv.c_str());
    os << buf;
  };
  auto fixed = [](double v, int prec) {
    char b[64];
    std::snprintf(b, sizeof b, "%.*f", prec, v);
    return std::string(b);
  };
  line("Dep. Variable:", dep_variable, "R-squared:", fixed(res.r_squared, 3));
  line("Model:", "OLS", "Adj. R-squared:", fixed(res.adj_r_squared, 3));
  line("Method:", "Least Squares", "F-statistic:", fixed(res.f_statistic, 4));
  line("No. Observations:", std::to_string(res.n_observations), "Df Residuals:", std::to_string(res.df_resid));

  std::size_t width = 10;
  for (const auto& c : res.coefficients) width = std::max(width, c.name.size());
  const double lo_q = (1.0 - res.ci_level) / 2.0;
  const std::string lo_label = "[" + fixed(lo_q, 3);
  const std::string hi_label = fixed(1.0 - lo_q, 3) + "]";
  os << std::string(width + 72, '=') << '\n';
  std::snprintf(buf, sizeof buf, "%-*s %10s %10s %10s %10s %12s %12s\n", static_cast<int>(width), "", "coef", "std err", "t",
                "P>|t|", lo_label.c_str(), hi_label.c_str());
  os << buf << std::string(width + 72, '-') << '\n';
  for (const auto& c : res.coefficients) {
    std::snprintf(buf, sizeof buf, "%-*s %10.4f %10.3f %10.3f %10.3f %12.3f %12.3f\n", static_cast<int>(width),
                  c.name.c_str(), c.estimate, c.std_err, c.t, c.p_value, c.ci_low, c.ci_high);
    os << buf;
  }
  os << std::string(width + 72, '=') << '\n';
  return os.str();
}

inline Table trace_table(const SimulationTrace& trace) {
  Table t{{"iteration", "user_id", "item_id", "true_pref", "rating", "phase"}, {}};
  t.rows.reserve(trace.entries.size());
  for (const auto& e : trace.entries)
    t.add_row({std::to_string(e.iteration), std::to_string(e.user), std::to_string(e.item), format_real(e.true_pref),
               std::to_string(to_int(e.rating)), std::string(to_string(e.phase))});
  return t;
}

inline Table utility_table(const SimulationTrace& trace, std::size_t window) {
  const auto smooth = trailing_mean(trace.iteration_utility, window);
  Table t{{"iteration", "mean_utility", "smoothed_utility"}, {}};
  for (std::size_t i = 0; i < trace.iteration_utility.size(); ++i)
    t.add_row({std::to_string(i), format_real(trace.iteration_utility[i]), format_real(smooth[i])});
  return t;
}

/// Loop-phase fractions, aggregated within users first.
inline Table fractions_table(const SimulationTrace& trace) {
  const auto f = ratings_distribution(trace.loop_entries());
  Table t{{"option", "fraction"}, {}};
  t.add_row({"dislike", format_real(f.dislike)});
  t.add_row({"like", format_real(f.like)});
  t.add_row({"superlike", format_real(f.superlike)});
  return t;
}

}  // namespace ratelab
