#pragma once

// Brute-force reference implementations used only by the test suites. They
// deliberately follow a different computational route from the library.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "quba/records.hpp"

namespace quba::oracle {

inline bool NearlyEqual(double a, double b, double rel = 1e-12, double abs_floor = 1e-15) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

inline double GeometricMean(const std::vector<double>& v) {
  for (double x : v) {
    if (x == 0.0) return 0.0;
  }
  double s = 0.0;
  for (double x : v) s += std::log(x);
  return std::exp(s / static_cast<double>(v.size()));
}

inline double Accuracy(const EvaluationSet& set) {
  double hits = 0.0;
  for (const auto& r : set.records()) {
    if (r.true_label.has_value() && r.pred_label == r.true_label.value()) hits += 1.0;
  }
  return hits / static_cast<double>(set.records().size());
}

// Scans each bin [k/B, (k+1)/B) (last bin closed) over all records.
inline double Ece(const EvaluationSet& set, int bins) {
  const auto& recs = set.records();
  const double n = static_cast<double>(recs.size());
  double total = 0.0;
  for (int k = 0; k < bins; ++k) {
    const double lo = static_cast<double>(k) / bins;
    const double hi = static_cast<double>(k + 1) / bins;
    double count = 0.0;
    double hits = 0.0;
    double conf = 0.0;
    for (const auto& r : recs) {
      const bool in = r.confidence >= lo && (r.confidence < hi || k == bins - 1);
      if (!in) continue;
      count += 1.0;
      hits += (r.pred_label == *r.true_label) ? 1.0 : 0.0;
      conf += r.confidence;
    }
    if (count > 0.0) total += count / n * std::abs(hits / count - conf / count);
  }
  return total;
}

inline double Ace(const EvaluationSet& set, int ranges) {
  const auto& recs = set.records();
  double total = 0.0;
  int occupied = 0;
  for (int c = 0; c < set.num_classes(); ++c) {
    std::vector<std::tuple<double, std::string, int>> group;
    for (const auto& r : recs) {
      if (r.pred_label == c) group.emplace_back(r.confidence, r.image_id, r.pred_label == *r.true_label ? 1 : 0);
    }
    if (group.empty()) continue;
    ++occupied;
    std::sort(group.begin(), group.end());
    const int n = static_cast<int>(group.size());
    const int r_count = std::min(ranges, n);
    const int base = n / r_count;
    const int extra = n % r_count;
    double class_sum = 0.0;
    for (int r = 0; r < r_count; ++r) {
      const int begin = r * base + std::min(r, extra);
      const int end = begin + base + (r < extra ? 1 : 0);
      double hits = 0.0;
      double conf = 0.0;
      for (int i = begin; i < end; ++i) {
        hits += std::get<2>(group[static_cast<std::size_t>(i)]);
        conf += std::get<0>(group[static_cast<std::size_t>(i)]);
      }
      class_sum += std::abs((hits - conf) / (end - begin));
    }
    total += class_sum / r_count;
  }
  return total / occupied;
}

inline double ClassBalance(const EvaluationSet& set) {
  const auto& recs = set.records();
  const int classes = set.num_classes();
  const double overall_acc = Accuracy(set);
  double overall_conf = 0.0;
  for (const auto& r : recs) overall_conf += *r.true_prob;
  overall_conf /= static_cast<double>(recs.size());
  double acc_var = 0.0;
  double conf_var = 0.0;
  for (int c = 0; c < classes; ++c) {
    double n = 0.0;
    double hits = 0.0;
    double conf = 0.0;
    for (const auto& r : recs) {
      if (*r.true_label != c) continue;
      n += 1.0;
      hits += r.pred_label == c ? 1.0 : 0.0;
      conf += *r.true_prob;
    }
    acc_var += std::pow(hits / n - overall_acc, 2);
    conf_var += std::pow(conf / n - overall_conf, 2);
  }
  const double f_acc = 1.0 - std::sqrt(acc_var / classes);
  const double f_conf = 1.0 - std::sqrt(conf_var / classes);
  return GeometricMean({f_acc, f_conf});
}

inline double ShapeBias(const EvaluationSet& set) {
  double shape = 0.0;
  double decided = 0.0;
  for (const auto& r : set.records()) {
    if (r.pred_label == *r.shape_label) shape += 1.0;
    if (r.pred_label == *r.shape_label || r.pred_label == *r.texture_label) decided += 1.0;
  }
  return shape / decided;
}

// 1 - 6 sum d^2 / (n (n^2 - 1)); valid without ties.
inline double SpearmanD2(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t below = 0;
      for (std::size_t j = 0; j < n; ++j) below += v[j] < v[i] ? 1 : 0;
      r[i] = static_cast<double>(below + 1);
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double dn = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (dn * (dn * dn - 1.0));
}

// Two-pass mean and sample standard deviation.
inline std::pair<double, double> MeanStd(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace quba::oracle
