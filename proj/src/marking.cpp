#include "dhn/marking.hpp"

#include <algorithm>
#include <numeric>

#include "dhn/errors.hpp"

namespace dhn {

namespace {

// Sums are compared with a relative slack so that exact ties such as
// 0.9 * 10 >= 9 are not lost to rounding.
constexpr double kSumSlack = 1e-12;

double sum_over(const std::vector<double>& values, const PipeSet& set) {
  double s = 0.0;
  for (std::size_t i : set) s += values.at(i);
  return s;
}

PipeSet all_of(std::size_t n) {
  PipeSet s(n);
  std::iota(s.begin(), s.end(), std::size_t{0});
  return s;
}

void check_theta(double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw Error("marking threshold must lie in [0, 1]");
}

}  // namespace

PipeSet min_cover(const std::vector<double>& values, const PipeSet& candidates, double theta) {
  check_theta(theta);
  const double total = sum_over(values, candidates);
  const double target = theta * total - kSumSlack * std::abs(total);
  PipeSet order = candidates;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b] || (values[a] == values[b] && a < b);
  });
  PipeSet out;
  double acc = 0.0;
  for (std::size_t i : order) {
    if (acc >= target) break;
    out.push_back(i);
    acc += values[i];
  }
  std::sort(out.begin(), out.end());
  return out;
}

PipeSet max_within(const std::vector<double>& values, const PipeSet& candidates, double theta) {
  check_theta(theta);
  const double total = sum_over(values, candidates);
  const double bound = theta * total + kSumSlack * std::abs(total);
  PipeSet order = candidates;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  PipeSet out;
  double acc = 0.0;
  for (std::size_t i : order) {
    if (acc + values[i] > bound) break;
    out.push_back(i);
    acc += values[i];
  }
  std::sort(out.begin(), out.end());
  return out;
}

PipeSet mark_refine(const std::vector<double>& disc_errors, double theta_r) {
  return min_cover(disc_errors, all_of(disc_errors.size()), theta_r);
}

PipeSet mark_upswitch(const std::vector<double>& decreases, double eps, double theta_u) {
  PipeSet above;
  for (std::size_t i = 0; i < decreases.size(); ++i) {
    if (decreases[i] > eps) above.push_back(i);
  }
  return min_cover(decreases, above, theta_u);
}

PipeSet mark_coarsen(const std::vector<double>& disc_errors, const PipeSet& candidates, double theta_c) {
  return max_within(disc_errors, candidates, theta_c);
}

PipeSet mark_coarsen(const std::vector<double>& disc_errors, double theta_c) {
  return mark_coarsen(disc_errors, all_of(disc_errors.size()), theta_c);
}

PipeSet mark_downswitch(const std::vector<double>& increases, const PipeSet& candidates, double tau, double eps,
                        double theta_d) {
  PipeSet below;
  for (std::size_t i : candidates) {
    if (increases.at(i) < tau * eps) below.push_back(i);
  }
  return max_within(increases, below, theta_d);
}

PipeSet mark_downswitch(const std::vector<double>& increases, double tau, double eps, double theta_d) {
  return mark_downswitch(increases, all_of(increases.size()), tau, eps, theta_d);
}

ModelLevel up_switch_level(ModelLevel level, double decrease, double eps) {
  if (level > 1 && decrease > eps) return level - 1;
  return 1;
}

ModelLevel up_switch_candidate(ModelLevel level) { return std::max(1, level - 1); }

ModelLevel down_switch_level(ModelLevel level) { return std::min(level + 1, kMaxLevel); }

PipeAssignment refine(const PipeAssignment& a) {
  PipeAssignment r = a;
  r.grid.intervals *= 2;
  r.grid.index += 1;
  return r;
}

bool can_coarsen(const PipeAssignment& a) {
  return a.grid.intervals % 2 == 0 && (a.grid.intervals / 2) % a.reference_intervals == 0;
}

PipeAssignment coarsen(const PipeAssignment& a) {
  if (!can_coarsen(a)) {
    throw CoarsenBelowReference("coarsening a grid with " + std::to_string(a.grid.intervals) +
                                " intervals would drop reference points");
  }
  PipeAssignment r = a;
  r.grid.intervals /= 2;
  r.grid.index -= 1;
  return r;
}

}  // namespace dhn
