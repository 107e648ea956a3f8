#include "liteatt/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace liteatt {

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile of an empty list");
  if (p < 0.0 || p > 100.0) throw std::invalid_argument("percentile outside [0, 100]");
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

GapRatio gap_ratio(std::span<const double> val_errors) {
  if (val_errors.size() < kMinCalibrationErrors)
    throw std::invalid_argument("gap_ratio: need at least " + std::to_string(kMinCalibrationErrors) +
                                " validation errors, got " + std::to_string(val_errors.size()));
  std::vector<double> sorted(val_errors.begin(), val_errors.end());
  for (double e : sorted)
    if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("gap_ratio: errors must be finite and >= 0");
  std::sort(sorted.begin(), sorted.end());
  GapRatio g;
  g.p95 = percentile_sorted(sorted, 95.0);
  g.p99 = percentile_sorted(sorted, 99.0);
  if (g.p95 <= 0.0)
    throw std::domain_error("gap_ratio: degenerate error distribution (P95 = 0); widen the validation data");
  g.gamma = (g.p99 - g.p95) / g.p95;
  return g;
}

double select_tnr_target(double gamma) {
  if (gamma < 0.0 || std::isnan(gamma)) throw std::invalid_argument("select_tnr_target: gamma must be >= 0");
  if (gamma < 0.2) return 0.99;
  if (gamma < 0.5) return 0.97;
  return 0.95;
}

double tnr_at(std::span<const double> errors, double threshold) {
  if (errors.empty()) return 0.0;
  const auto below = std::count_if(errors.begin(), errors.end(), [&](double e) { return e < threshold; });
  return static_cast<double>(below) / static_cast<double>(errors.size());
}

namespace {

// Threshold separating the k smallest errors from the rest: the midpoint of
// adjacent order statistics, or just above/below the extremes.
double threshold_for_count(const std::vector<double>& sorted, std::size_t k) {
  if (k == 0) return sorted.front() > 0.0 ? sorted.front() / 2.0 : 0.0;
  if (k == sorted.size()) return sorted.back() > 0.0 ? sorted.back() * 1.5 : 1e-12;
  return sorted[k - 1] + (sorted[k] - sorted[k - 1]) / 2.0;
}

}  // namespace

ThresholdSearch binary_search_threshold(std::span<const double> val_errors, double tnr_target) {
  if (val_errors.empty()) throw std::invalid_argument("binary_search_threshold: no errors");
  if (!(tnr_target > 0.0 && tnr_target < 1.0))
    throw std::invalid_argument("binary_search_threshold: target must lie in (0, 1)");

  std::vector<double> sorted(val_errors.begin(), val_errors.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  // Bisection on the threshold value over [0, 2 max] for the point where
  // the step function TNR(T) first reaches the target; lo keeps
  // TNR(lo) < target and hi keeps TNR(hi) >= target.
  double lo = 0.0;
  double hi = 2.0 * sorted.back();
  if (hi <= 0.0) hi = 1e-12;
  for (int it = 0; it < kMaxSearchIterations && hi > lo; ++it) {
    const double mid = lo + (hi - lo) / 2.0;
    if (mid <= lo || mid >= hi) break;
    if (tnr_at(sorted, mid) < tnr_target)
      lo = mid;
    else
      hi = mid;
  }
  // Snap to the midpoint between the order statistics that bracket the
  // crossing so that the decision is not sensitive to rounding.
  auto count_below = [&](double t) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
  };
  for (const std::size_t k : {count_below(hi), count_below(lo)}) {
    if (k == 0) continue;
    const double t = threshold_for_count(sorted, k);
    const double achieved = tnr_at(sorted, t);
    if (std::abs(achieved - tnr_target) < kTnrTolerance) return {t, achieved, true};
  }

  // Tolerance unreachable on this discrete set: take the largest achievable
  // TNR not above the target (tighter threshold), else the smallest above.
  const auto below_target = static_cast<std::size_t>(std::floor(tnr_target * n + 1e-9));
  std::size_t k = below_target;
  if (k == 0) {
    k = 1;
    while (k < sorted.size() && sorted[k] == sorted[k - 1]) ++k;
  } else {
    // Ties: a threshold cannot split equal errors; walk down to a boundary.
    while (k > 0 && k < sorted.size() && sorted[k] == sorted[k - 1]) --k;
    if (k == 0) {
      k = 1;
      while (k < sorted.size() && sorted[k] == sorted[k - 1]) ++k;
    }
  }
  const double t = threshold_for_count(sorted, k);
  const double achieved = tnr_at(sorted, t);
  return {t, achieved, std::abs(achieved - tnr_target) < kTnrTolerance};
}

CalibrationResult calibrate(std::span<const double> val_errors) {
  const GapRatio g = gap_ratio(val_errors);
  CalibrationResult r;
  r.gamma = g.gamma;
  r.p95 = g.p95;
  r.p99 = g.p99;
  r.tnr_target = select_tnr_target(g.gamma);
  const auto s = binary_search_threshold(val_errors, r.tnr_target);
  r.t_opt = s.t_opt;
  r.achieved_tnr_val = s.achieved_tnr;
  r.exact = s.exact;
  return r;
}

std::string format_calibration(const CalibrationResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "gamma=%.6g p95=%.6g p99=%.6g tnr_target=%.2f t_opt=%.9g achieved_tnr_val=%.4f exact=%s", r.gamma,
                r.p95, r.p99, r.tnr_target, r.t_opt, r.achieved_tnr_val, r.exact ? "true" : "false");
  return buf;
}

}  // namespace liteatt
