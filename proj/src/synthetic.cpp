#include "quba/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace quba::synthetic {

double Uniform(SplitMix64& rng) { return static_cast<double>(rng.Next() >> 11) * 0x1.0p-53; }

double Normal(SplitMix64& rng) {
  double u1 = Uniform(rng);
  while (u1 <= 0.0) u1 = Uniform(rng);
  const double u2 = Uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

std::string ZooId(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth-%04zu", i);
  return buf;
}

constexpr ArchitectureFamily kArchCycle[] = {ArchitectureFamily::kCnn, ArchitectureFamily::kTransformer,
                                             ArchitectureFamily::kCnn, ArchitectureFamily::kTransformer,
                                             ArchitectureFamily::kVil, ArchitectureFamily::kBcos};
constexpr Paradigm kParadigmCycle[] = {Paradigm::kSupervised, Paradigm::kAdversarial, Paradigm::kSelfSupE2e,
                                       Paradigm::kSelfSupLp,  Paradigm::kSemiSupervised, Paradigm::kA1};
constexpr const char* kTrainCycle[] = {"in1k", "in21k", "large-scale"};

}  // namespace

std::vector<ZooModel> GenerateZoo(std::size_t num_models, std::uint64_t seed, const DimensionMoments& center) {
  SplitMix64 rng(seed);
  std::vector<ZooModel> zoo;
  zoo.reserve(num_models);
  for (std::size_t i = 0; i < num_models; ++i) {
    ZooModel m;
    m.card.model_id = ZooId(i);
    m.card.architecture_family = kArchCycle[rng.Below(std::size(kArchCycle))];
    m.card.paradigm = kParadigmCycle[rng.Below(std::size(kParadigmCycle))];
    m.card.train_dataset = kTrainCycle[rng.Below(std::size(kTrainCycle))];
    m.profile = DimensionProfile(m.card.model_id);
    for (Dimension d : kAllDimensions) {
      double v = center.Mean(d) + center.Std(d) * Normal(rng);
      switch (d) {
        case Dimension::kAccuracy:
        case Dimension::kClassBalance:
        case Dimension::kShapeBias: v = std::clamp(v, 0.0, 1.0); break;
        case Dimension::kCalibrationError: v = std::clamp(v, 1e-5, 1.0); break;
        case Dimension::kObjectFocus: v = std::clamp(v, 0.0, 2.0); break;
        case Dimension::kParams: v = std::max(v, 1.0); break;
        default: v = std::max(v, 0.0); break;
      }
      m.profile[d] = v;
    }
    m.card.params_millions = *m.profile[Dimension::kParams];
    zoo.push_back(std::move(m));
  }
  return zoo;
}

LogTargets TargetsFromProfile(const DimensionProfile& profile) {
  LogTargets t;
  auto get = [&](Dimension d, double fallback) { return profile[d].value_or(fallback); };
  t.clean_accuracy = std::clamp(get(Dimension::kAccuracy, 0.8), 0.05, 1.0);
  const double adv = std::clamp(get(Dimension::kAdvRobustness, 0.2), 0.0, 1.0);
  t.fgsm_accuracy = std::clamp(t.clean_accuracy * std::sqrt(adv), 0.0, 1.0);
  t.pgd_accuracy = std::clamp(t.clean_accuracy * adv * std::sqrt(adv), 0.0, 1.0);
  const double crob = std::clamp(get(Dimension::kCRobustness, 0.5), 0.0, 1.0);
  t.corruption_accuracy = {std::clamp(t.clean_accuracy * crob * 1.1, 0.0, 1.0),
                           std::clamp(t.clean_accuracy * crob * 0.9, 0.0, 1.0)};
  const double ood = std::clamp(get(Dimension::kOodRobustness, 0.5), 0.0, 1.0 / t.clean_accuracy);
  t.ood_accuracy.fill(std::clamp(t.clean_accuracy * ood, 0.0, 1.0));
  const double bf = 1.0 - get(Dimension::kObjectFocus, 0.93);
  t.mixed_same_accuracy = std::clamp(0.7 + bf / 2.0, 0.0, 1.0);
  t.mixed_rand_accuracy = std::clamp(0.7 - bf / 2.0, 0.0, 1.0);
  t.shape_fraction = std::clamp(get(Dimension::kShapeBias, 0.3), 0.0, 1.0);
  t.overconfidence = get(Dimension::kCalibrationError, 0.0045) * 4.0;
  return t;
}

namespace {

std::vector<PredictionRecord> LabelledRecords(SplitMix64& rng, std::size_t n, int classes, double accuracy,
                                              double overconfidence) {
  std::vector<PredictionRecord> out;
  out.reserve(n);
  // Exact correct count so that accuracies match the targets up to 1/n.
  const auto correct_target = static_cast<std::size_t>(std::llround(accuracy * static_cast<double>(n)));
  std::vector<char> correct(n, 0);
  for (std::size_t i = 0; i < correct_target && i < n; ++i) correct[i] = 1;
  for (std::size_t i = n; i > 1; --i) std::swap(correct[i - 1], correct[rng.Below(i)]);
  for (std::size_t i = 0; i < n; ++i) {
    PredictionRecord r;
    r.image_id = "img-" + std::to_string(i);
    const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
    r.true_label = label;
    const double conf = std::clamp(accuracy + overconfidence + 0.1 * Normal(rng), 1.0 / classes, 1.0);
    r.confidence = conf;
    if (correct[i] != 0 || classes == 1) {
      r.pred_label = label;
      r.true_prob = conf;
    } else {
      r.pred_label = (label + 1 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(classes - 1)))) % classes;
      r.true_prob = conf * Uniform(rng);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PredictionRecord> CueConflictRecords(SplitMix64& rng, std::size_t n, int classes, double shape_fraction) {
  std::vector<PredictionRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    PredictionRecord r;
    r.image_id = "cue-" + std::to_string(i);
    const int shape = static_cast<int>(rng.Below(static_cast<std::uint64_t>(classes)));
    const int texture = (shape + 1 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(classes - 1)))) % classes;
    r.shape_label = shape;
    r.texture_label = texture;
    const double u = Uniform(rng);
    if (u < 0.8 * shape_fraction) {
      r.pred_label = shape;
    } else if (u < 0.8) {
      r.pred_label = texture;
    } else {
      r.pred_label = static_cast<int>(rng.Below(static_cast<std::uint64_t>(classes)));
    }
    r.confidence = std::clamp(0.5 + 0.2 * Normal(rng), 0.0, 1.0);
    out.push_back(std::move(r));
  }
  // At least one decision must follow shape or texture.
  out.front().pred_label = *out.front().shape_label;
  return out;
}

}  // namespace

std::vector<EvaluationSet> GenerateModelLogs(const std::string& model_id, const LogTargets& t, std::size_t records,
                                             int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic logs need >= 2 classes");
  SplitMix64 rng(seed);
  constexpr int kCoarseClasses = 16;
  std::vector<EvaluationSet> sets;
  auto labelled = [&](DatasetKind kind, double acc, int classes) {
    sets.push_back(EvaluationSet::Create(model_id, std::move(kind), classes,
                                         LabelledRecords(rng, records, classes, acc, t.overconfidence)));
  };
  labelled(DatasetKind::Clean(), t.clean_accuracy, num_classes);
  DatasetKind fgsm = DatasetKind::Attack(AttackName::kFgsm);
  fgsm.attack_params.epsilon = 8.0 / 255.0;
  labelled(fgsm, t.fgsm_accuracy, num_classes);
  DatasetKind pgd = DatasetKind::Attack(AttackName::kPgd);
  pgd.attack_params.epsilon = 8.0 / 255.0;
  pgd.attack_params.iterations = 10;
  pgd.attack_params.step_size = 2.0 / 255.0;
  labelled(pgd, t.pgd_accuracy, num_classes);
  for (std::size_t i = 0; i < t.corruption_accuracy.size(); ++i) {
    labelled(DatasetKind::Corruption(i % 2 == 0 ? "gaussian-noise" : "fog", static_cast<int>(i / 2 % 5) + 1),
             t.corruption_accuracy[i], num_classes);
  }
  for (std::size_t i = 0; i < std::size(kAllOodNames); ++i) {
    labelled(DatasetKind::Ood(kAllOodNames[i]), t.ood_accuracy[i], num_classes);
  }
  labelled(DatasetKind::Of(Family::kMixedSame), t.mixed_same_accuracy, 9);
  labelled(DatasetKind::Of(Family::kMixedRand), t.mixed_rand_accuracy, 9);
  sets.push_back(EvaluationSet::Create(model_id, DatasetKind::Of(Family::kCueConflict), kCoarseClasses,
                                       CueConflictRecords(rng, records, kCoarseClasses, t.shape_fraction)));
  return sets;
}

EvaluationSet RandomEvaluationSet(SplitMix64& rng, Family family, std::size_t max_records, int max_classes) {
  const int classes = 2 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(std::max(1, max_classes - 1))));
  std::size_t n = 1 + static_cast<std::size_t>(rng.Below(max_records));
  if (family == Family::kClean) n = std::max(n, static_cast<std::size_t>(classes));
  DatasetKind kind = DatasetKind::Of(family);
  switch (family) {
    case Family::kAttack: kind = DatasetKind::Attack(rng.Below(2) == 0 ? AttackName::kFgsm : AttackName::kPgd); break;
    case Family::kCorruption:
      kind = DatasetKind::Corruption("contrast", 1 + static_cast<int>(rng.Below(5)));
      break;
    case Family::kOod: kind = DatasetKind::Ood(kAllOodNames[rng.Below(5)]); break;
    default: break;
  }
  // A coarse grid makes exact bin boundaries and confidence ties common.
  auto draw_conf = [&]() {
    const std::uint64_t mode = rng.Below(4);
    if (mode == 0) return static_cast<double>(rng.Below(16)) / 15.0;
    if (mode == 1) return static_cast<double>(rng.Below(11)) / 10.0;
    return Uniform(rng);
  };
  std::vector<PredictionRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    PredictionRecord r;
    r.image_id = "r" + std::to_string(rng.Below(1000000)) + "-" + std::to_string(i);
    r.confidence = draw_conf();
    r.pred_label = static_cast<int>(rng.Below(static_cast<std::uint64_t>(classes)));
    if (family == Family::kCueConflict) {
      const int shape = static_cast<int>(rng.Below(static_cast<std::uint64_t>(classes)));
      const int texture = (shape + 1 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(classes - 1)))) % classes;
      r.shape_label = shape;
      r.texture_label = texture;
      const std::uint64_t pick = rng.Below(3);
      if (pick == 0) r.pred_label = shape;
      if (pick == 1) r.pred_label = texture;
      if (i == 0) r.pred_label = shape;
    } else {
      const int label = (family == Family::kClean && i < static_cast<std::size_t>(classes))
                            ? static_cast<int>(i)
                            : static_cast<int>(rng.Below(static_cast<std::uint64_t>(classes)));
      r.true_label = label;
      if (rng.Below(2) == 0) r.pred_label = label;
      r.true_prob = r.pred_label == label ? r.confidence : r.confidence * Uniform(rng);
    }
    records.push_back(std::move(r));
  }
  return EvaluationSet::Create("rand-model", std::move(kind), classes, std::move(records));
}

}  // namespace quba::synthetic
