#include "quba/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace quba {

bool DimensionProfile::Complete() const {
  return std::all_of(values_.begin(), values_.end(), [](const auto& v) { return v.has_value(); });
}

double DimensionProfile::Value(Dimension d) const {
  const auto& v = values_[Index(d)];
  if (!v) {
    throw Error(ErrorCode::kUnavailable,
                "dimension '" + std::string(Key(d)) + "' unavailable for model '" + model_id_ + "'");
  }
  return *v;
}

void DimensionProfile::CheckRanges() const {
  for (Dimension d : kAllDimensions) {
    const auto& v = values_[Index(d)];
    if (!v) continue;
    double lo = 0.0;
    double hi = 1.0;
    switch (d) {
      case Dimension::kAdvRobustness:
      case Dimension::kCRobustness:
      case Dimension::kOodRobustness: hi = HUGE_VAL; break;
      case Dimension::kObjectFocus: hi = 2.0; break;
      case Dimension::kParams: hi = HUGE_VAL; break;
      default: break;
    }
    const bool ok = std::isfinite(*v) && *v >= lo && *v <= hi && (d != Dimension::kParams || *v > 0.0);
    if (!ok) {
      std::ostringstream os;
      os << "dimension '" << Key(d) << "' of model '" << model_id_ << "' out of range: " << *v;
      throw Error(ErrorCode::kRange, os.str());
    }
  }
}

// ---------------------------------------------------------------------------

double GeometricMean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "geometric mean of an empty list");
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "geometric mean requires finite non-negative values");
    }
  }
  if (std::find(values.begin(), values.end(), 0.0) != values.end()) return 0.0;
  const double n = static_cast<double>(values.size());
  double product = 1.0;
  for (double v : values) product *= v;
  if (std::isnormal(product)) {
    if (values.size() == 1) return product;
    if (values.size() == 2) return std::sqrt(product);
    if (values.size() == 3) return std::cbrt(product);
    return std::pow(product, 1.0 / n);
  }
  // Product under- or overflowed.
  double log_sum = 0.0;
  for (double v : values) log_sum += std::log(v);
  return std::exp(log_sum / n);
}

namespace {

void RequireLabelled(const EvaluationSet& set, const char* what) {
  if (!HasTrueLabel(set.family())) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " requires true labels; got family '" + std::string(ToString(set.family())) + "'");
  }
}

void RequireSameModel(const EvaluationSet& a, const EvaluationSet& b) {
  if (a.model_id() != b.model_id()) {
    throw Error(ErrorCode::kInvalidArgument,
                "model_id mismatch: '" + a.model_id() + "' vs '" + b.model_id() + "'");
  }
}

void RequireFamily(const EvaluationSet& s, Family f) {
  if (s.family() != f) {
    throw Error(ErrorCode::kInvalidArgument, "expected family '" + std::string(ToString(f)) + "', got '" +
                                                 std::string(ToString(s.family())) + "'");
  }
}

double CleanAccuracyOrThrow(const EvaluationSet& clean) {
  RequireFamily(clean, Family::kClean);
  const double a = Top1Accuracy(clean);
  if (a <= 0.0) {
    throw Error(ErrorCode::kUndefined, "clean accuracy is zero for '" + clean.model_id() +
                                           "'; relative robustness undefined");
  }
  return a;
}

}  // namespace

double Top1Accuracy(const EvaluationSet& set) {
  RequireLabelled(set, "top-1 accuracy");
  std::size_t correct = 0;
  for (const auto& r : set.records()) correct += r.IsCorrect() ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

double AdversarialRobustness(const EvaluationSet& clean, const EvaluationSet& fgsm, const EvaluationSet& pgd) {
  RequireSameModel(clean, fgsm);
  RequireSameModel(clean, pgd);
  if (fgsm.kind().attack_name != AttackName::kFgsm) {
    throw Error(ErrorCode::kInvalidArgument, "expected an fgsm attack set, got '" + fgsm.kind().Key() + "'");
  }
  if (pgd.kind().attack_name != AttackName::kPgd) {
    throw Error(ErrorCode::kInvalidArgument, "expected a pgd attack set, got '" + pgd.kind().Key() + "'");
  }
  const double a = CleanAccuracyOrThrow(clean);
  return GeometricMean({Top1Accuracy(fgsm) / a, Top1Accuracy(pgd) / a});
}

double CorruptionRobustness(const EvaluationSet& clean, std::span<const EvaluationSet> corrupted) {
  if (corrupted.empty()) throw Error(ErrorCode::kInvalidArgument, "no corrupted sets");
  std::set<std::pair<std::string, int>> seen;
  double sum = 0.0;
  for (const auto& s : corrupted) {
    RequireSameModel(clean, s);
    RequireFamily(s, Family::kCorruption);
    if (!seen.emplace(*s.kind().corruption_name, *s.kind().severity).second) {
      throw Error(ErrorCode::kDuplicate, "duplicate corruption set '" + s.kind().Key() + "'");
    }
    sum += Top1Accuracy(s);
  }
  const double a = CleanAccuracyOrThrow(clean);
  return (sum / static_cast<double>(corrupted.size())) / a;
}

double OodRobustness(const EvaluationSet& clean, std::span<const EvaluationSet> ood_sets) {
  std::array<const EvaluationSet*, std::size(kAllOodNames)> by_name{};
  for (const auto& s : ood_sets) {
    RequireSameModel(clean, s);
    RequireFamily(s, Family::kOod);
    const auto idx = static_cast<std::size_t>(*s.kind().ood_name);
    if (by_name[idx] != nullptr) {
      throw Error(ErrorCode::kDuplicate, "duplicate OOD set '" + s.kind().Key() + "'");
    }
    by_name[idx] = &s;
  }
  for (OodName o : kAllOodNames) {
    if (by_name[static_cast<std::size_t>(o)] == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "missing OOD set '" + std::string(ToString(o)) + "'");
    }
  }
  const double a = CleanAccuracyOrThrow(clean);
  std::array<double, std::size(kAllOodNames)> rel{};
  for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = Top1Accuracy(*by_name[i]) / a;
  return GeometricMean(rel);
}

// ---------------------------------------------------------------------------
// Calibration

int ConfidenceBin(double confidence, int bins) {
  if (bins < 1) throw Error(ErrorCode::kInvalidArgument, "bins must be >= 1");
  int idx = static_cast<int>(std::floor(confidence * bins));
  idx = std::clamp(idx, 0, bins - 1);
  // Snap against the exact boundary values k / bins.
  while (idx + 1 < bins && confidence >= static_cast<double>(idx + 1) / bins) ++idx;
  while (idx > 0 && confidence < static_cast<double>(idx) / bins) --idx;
  return idx;
}

double ExpectedCalibrationError(const EvaluationSet& set, int bins) {
  RequireLabelled(set, "ECE");
  if (bins < 1) throw Error(ErrorCode::kInvalidArgument, "bins must be >= 1");
  std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
  std::vector<std::size_t> correct(count.size(), 0);
  std::vector<double> conf_sum(count.size(), 0.0);
  for (const auto& r : set.records()) {
    const auto b = static_cast<std::size_t>(ConfidenceBin(r.confidence, bins));
    ++count[b];
    correct[b] += r.IsCorrect() ? 1 : 0;
    conf_sum[b] += r.confidence;
  }
  const double n = static_cast<double>(set.size());
  double ece = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    ece += (nb / n) * std::abs(static_cast<double>(correct[b]) / nb - conf_sum[b] / nb);
  }
  return ece;
}

double AdaptiveCalibrationError(const EvaluationSet& set, int ranges) {
  RequireLabelled(set, "ACE");
  if (ranges < 1) throw Error(ErrorCode::kInvalidArgument, "ranges must be >= 1");
  const auto& records = set.records();
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].pred_label].push_back(i);

  double total = 0.0;
  for (auto& [label, idx] : groups) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (records[a].confidence != records[b].confidence) return records[a].confidence < records[b].confidence;
      return records[a].image_id < records[b].image_id;
    });
    const std::size_t n = idx.size();
    const std::size_t r = std::min(static_cast<std::size_t>(ranges), n);
    const std::size_t base = n / r;
    const std::size_t extra = n % r;
    double group_gap = 0.0;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < r; ++k) {
      const std::size_t len = base + (k < extra ? 1 : 0);
      std::size_t correct = 0;
      double conf = 0.0;
      for (std::size_t j = pos; j < pos + len; ++j) {
        correct += records[idx[j]].IsCorrect() ? 1 : 0;
        conf += records[idx[j]].confidence;
      }
      const double m = static_cast<double>(len);
      group_gap += std::abs(static_cast<double>(correct) / m - conf / m);
      pos += len;
    }
    total += group_gap / static_cast<double>(r);
  }
  return total / static_cast<double>(groups.size());
}

double CalibrationError(const EvaluationSet& set) {
  return GeometricMean({ExpectedCalibrationError(set), AdaptiveCalibrationError(set)});
}

// ---------------------------------------------------------------------------

ClassBalanceParts ClassBalanceComponents(const EvaluationSet& set) {
  RequireFamily(set, Family::kClean);
  const auto classes = static_cast<std::size_t>(set.num_classes());
  std::vector<std::size_t> count(classes, 0);
  std::vector<std::size_t> correct(classes, 0);
  std::vector<double> prob(classes, 0.0);
  std::size_t total_correct = 0;
  double total_prob = 0.0;
  for (const auto& r : set.records()) {
    const auto c = static_cast<std::size_t>(*r.true_label);
    ++count[c];
    correct[c] += r.IsCorrect() ? 1 : 0;
    prob[c] += *r.true_prob;
    total_correct += r.IsCorrect() ? 1 : 0;
    total_prob += *r.true_prob;
  }
  const double n = static_cast<double>(set.size());
  const double acc = static_cast<double>(total_correct) / n;
  const double conf = total_prob / n;
  double acc_ss = 0.0;
  double conf_ss = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0) {
      throw Error(ErrorCode::kUndefined, "class " + std::to_string(c) + " has no records in '" +
                                             set.model_id() + "' clean set");
    }
    const double nc = static_cast<double>(count[c]);
    const double da = static_cast<double>(correct[c]) / nc - acc;
    const double dc = prob[c] / nc - conf;
    acc_ss += da * da;
    conf_ss += dc * dc;
  }
  ClassBalanceParts parts{};
  parts.accuracy_balance = 1.0 - std::sqrt(acc_ss / static_cast<double>(classes));
  parts.confidence_balance = 1.0 - std::sqrt(conf_ss / static_cast<double>(classes));
  parts.combined = GeometricMean({parts.accuracy_balance, parts.confidence_balance});
  return parts;
}

double ClassBalance(const EvaluationSet& set) { return ClassBalanceComponents(set).combined; }

double ObjectFocus(const EvaluationSet& mixed_same, const EvaluationSet& mixed_rand) {
  RequireFamily(mixed_same, Family::kMixedSame);
  RequireFamily(mixed_rand, Family::kMixedRand);
  RequireSameModel(mixed_same, mixed_rand);
  return 1.0 - (Top1Accuracy(mixed_same) - Top1Accuracy(mixed_rand));
}

double ShapeBias(const EvaluationSet& set) {
  RequireFamily(set, Family::kCueConflict);
  std::size_t shape = 0;
  std::size_t texture = 0;
  for (const auto& r : set.records()) {
    if (r.pred_label == *r.shape_label) ++shape;
    else if (r.pred_label == *r.texture_label) ++texture;
  }
  if (shape + texture == 0) {
    throw Error(ErrorCode::kUndefined, "no cue-conflict decision follows shape or texture in '" +
                                           set.model_id() + "'");
  }
  return static_cast<double>(shape) / static_cast<double>(shape + texture);
}

// ---------------------------------------------------------------------------

namespace {

// Undefined metrics (zero clean accuracy, uncovered classes) leave the
// dimension unavailable; other errors propagate.
template <typename F>
std::optional<double> TryMetric(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUndefined) return std::nullopt;
    throw;
  }
}

}  // namespace

DimensionProfile BuildDimensionProfile(const ModelBundle& bundle, const ModelCard& card) {
  if (bundle.model_id != card.model_id) {
    throw Error(ErrorCode::kInvalidArgument,
                "bundle model '" + bundle.model_id + "' does not match card '" + card.model_id + "'");
  }
  DimensionProfile p(card.model_id);
  p[Dimension::kParams] = card.params_millions;
  if (bundle.clean) {
    const EvaluationSet& clean = *bundle.clean;
    p[Dimension::kAccuracy] = Top1Accuracy(clean);
    p[Dimension::kCalibrationError] = CalibrationError(clean);
    p[Dimension::kClassBalance] = TryMetric([&] { return ClassBalance(clean); });
    if (bundle.fgsm && bundle.pgd) {
      p[Dimension::kAdvRobustness] =
          TryMetric([&] { return AdversarialRobustness(clean, *bundle.fgsm, *bundle.pgd); });
    }
    if (!bundle.corruption.empty()) {
      p[Dimension::kCRobustness] = TryMetric([&] { return CorruptionRobustness(clean, bundle.corruption); });
    }
    if (bundle.ood.size() == std::size(kAllOodNames)) {
      p[Dimension::kOodRobustness] = TryMetric([&] { return OodRobustness(clean, bundle.ood); });
    }
  }
  if (bundle.mixed_same && bundle.mixed_rand) {
    p[Dimension::kObjectFocus] = ObjectFocus(*bundle.mixed_same, *bundle.mixed_rand);
  }
  if (bundle.cue_conflict) {
    p[Dimension::kShapeBias] = TryMetric([&] { return ShapeBias(*bundle.cue_conflict); });
  }
  return p;
}

}  // namespace quba
