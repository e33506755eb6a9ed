#pragma once

#include <cstdint>
#include <vector>

#include "quba/aggregate.hpp"
#include "quba/metrics.hpp"
#include "quba/records.hpp"
#include "quba/stats.hpp"

// Seeded generators for synthetic model zoos and prediction logs. Used by the
// test suites and by the `synth-zoo` CLI subcommand.
namespace quba::synthetic {

// Standard normal draw (Box-Muller on SplitMix64).
double Normal(SplitMix64& rng);
// Uniform in [0, 1).
double Uniform(SplitMix64& rng);

struct ZooModel {
  ModelCard card;
  DimensionProfile profile;
};

// Profiles with each dimension drawn independently from N(mean, std) of
// `center`, clipped into the dimension's valid range. Model ids are
// "synth-0000", "synth-0001", ...
std::vector<ZooModel> GenerateZoo(std::size_t num_models, std::uint64_t seed,
                                  const DimensionMoments& center = PublishedReferenceMoments());

// Target accuracies for one model's logs.
struct LogTargets {
  double clean_accuracy = 0.8;
  double fgsm_accuracy = 0.2;
  double pgd_accuracy = 0.1;
  std::vector<double> corruption_accuracy = {0.5, 0.4};
  std::array<double, 5> ood_accuracy = {0.4, 0.4, 0.4, 0.4, 0.4};
  double mixed_same_accuracy = 0.8;
  double mixed_rand_accuracy = 0.75;
  double shape_fraction = 0.3;  // of cue-conflict decisions
  double overconfidence = 0.02;  // mean confidence minus accuracy
};

// Targets loosely derived from a profile so that scored logs land near it.
LogTargets TargetsFromProfile(const DimensionProfile& profile);

// Full bundle of logs (clean, fgsm, pgd, corruptions, five OOD, mixed-same,
// mixed-rand, cue-conflict) with `records` records each.
std::vector<EvaluationSet> GenerateModelLogs(const std::string& model_id, const LogTargets& targets,
                                             std::size_t records, int num_classes, std::uint64_t seed);

// Random valid evaluation set of the given family, for property tests.
EvaluationSet RandomEvaluationSet(SplitMix64& rng, Family family, std::size_t max_records = 200,
                                  int max_classes = 10);

}  // namespace quba::synthetic
