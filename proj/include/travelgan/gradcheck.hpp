#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "travelgan/params.hpp"
#include "travelgan/tensor.hpp"

namespace travelgan {

// Central finite-difference verification of analytic gradients. Runs at
// 64-bit only; float rounding noise at the default step would drown real
// defects.
struct FiniteDiffEntry {
  std::string name;
  int64_t coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool kink = false;  // flagged non-differentiable point, excluded from pass/fail
};

struct FiniteDiffReport {
  std::vector<FiniteDiffEntry> entries;
  double max_rel_error = 0.0;  // over non-kink entries
  double mean_rel_error = 0.0;
  int64_t checked = 0;
  int64_t kinks = 0;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

// loss_fn evaluates the scalar loss at the given parameters; kink_fn (may be
// null) marks parameter coordinates sitting on a non-differentiable point so
// they are reported but excluded from the pass/fail statistics.
inline FiniteDiffReport finite_diff_check(
    const std::function<double(const ParameterSet<double>&)>& loss_fn,
    const ParameterSet<double>& params, const GradientSet<double>& analytic_grads,
    double step = 1e-5,
    const std::function<bool(const std::string&, int64_t)>& kink_fn = nullptr) {
  FiniteDiffReport report;
  ParameterSet<double> work = params;
  double sum_rel = 0.0;

  for (const auto& [name, p] : params) {
    Tensor<double>& wp = work.at(name);
    const auto gi = analytic_grads.find(name);
    for (int64_t i = 0; i < p.size(); ++i) {
      const double saved = wp[i];
      wp[i] = saved + step;
      const double plus = loss_fn(work);
      wp[i] = saved - step;
      const double minus = loss_fn(work);
      wp[i] = saved;

      FiniteDiffEntry e;
      e.name = name;
      e.coordinate = i;
      e.analytic = gi != analytic_grads.end() ? gi->second[i] : 0.0;
      e.numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::fabs(e.analytic), std::fabs(e.numeric), 1e-8});
      e.rel_error = std::fabs(e.analytic - e.numeric) / denom;
      e.kink = kink_fn && kink_fn(name, i);
      if (e.kink) {
        report.kinks += 1;
      } else {
        report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
        sum_rel += e.rel_error;
        report.checked += 1;
      }
      report.entries.push_back(std::move(e));
    }
  }
  report.mean_rel_error = report.checked > 0 ? sum_rel / static_cast<double>(report.checked) : 0.0;
  return report;
}

}  // namespace travelgan
