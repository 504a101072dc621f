// Test-only oracles, deliberately independent of the library implementations
// they check.

#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace ttaug_test {

// Brute-force EER: every observed score is tried as a threshold, FAR and FRR
// are counted from scratch each time (accept iff score >= t), and the
// crossing of FAR - FRR is linearly interpolated between adjacent threshold
// points. Returns a percentage.
inline double oracle_eer_percent(const std::vector<double>& targets,
                                 const std::vector<double>& nontargets,
                                 double* threshold_out = nullptr) {
  std::set<double> grid(targets.begin(), targets.end());
  grid.insert(nontargets.begin(), nontargets.end());
  std::vector<double> thresholds(grid.begin(), grid.end());
  thresholds.push_back(*grid.rbegin() + 1.0);  // above every score

  auto far_at = [&](double t) {
    size_t n = 0;
    for (double s : nontargets) {
      if (s >= t) ++n;
    }
    return static_cast<double>(n) / static_cast<double>(nontargets.size());
  };
  auto frr_at = [&](double t) {
    size_t n = 0;
    for (double s : targets) {
      if (s < t) ++n;
    }
    return static_cast<double>(n) / static_cast<double>(targets.size());
  };

  for (size_t i = 0; i + 1 < thresholds.size(); ++i) {
    double far0 = far_at(thresholds[i]);
    double frr0 = frr_at(thresholds[i]);
    double d0 = far0 - frr0;
    if (d0 == 0.0) {
      if (threshold_out) *threshold_out = thresholds[i];
      return 100.0 * far0;
    }
    double far1 = far_at(thresholds[i + 1]);
    double frr1 = frr_at(thresholds[i + 1]);
    double d1 = far1 - frr1;
    if (d0 > 0.0 && d1 <= 0.0) {
      double lambda = d0 / (d0 - d1);
      if (threshold_out) {
        *threshold_out =
            thresholds[i] + lambda * (thresholds[i + 1] - thresholds[i]);
      }
      return 100.0 * (far0 + lambda * (far1 - far0));
    }
  }
  if (threshold_out) *threshold_out = thresholds.back();
  return 100.0 * far_at(thresholds.back());
}

}  // namespace ttaug_test
