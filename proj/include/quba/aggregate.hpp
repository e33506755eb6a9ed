#pragma once

#include <array>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quba/dimensions.hpp"
#include "quba/metrics.hpp"

namespace quba {

enum class StdEstimator { kSample, kPopulation };

inline constexpr double kDefaultTrimFraction = 0.1;

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

// Sorts `values`, discards floor(trim_fraction * n) from each tail and returns
// the mean and standard deviation of the survivors. Requires >= 3 survivors
// and non-zero survivor variance.
Moments TrimmedMoments(std::vector<double> values, double trim_fraction = kDefaultTrimFraction,
                       StdEstimator estimator = StdEstimator::kSample);

// Number of values dropped from each tail.
std::size_t TrimCount(std::size_t n, double trim_fraction);

// Per-dimension normalization context. Orientation is fixed by LowerIsBetter().
struct DimensionMoments {
  std::array<double, kNumDimensions> mean{};
  std::array<double, kNumDimensions> std{};

  double Mean(Dimension d) const { return mean[Index(d)]; }
  double Std(Dimension d) const { return std[Index(d)]; }

  // Throws kRange unless every std is finite and positive.
  void Validate() const;

  bool operator==(const DimensionMoments&) const = default;
};

DimensionMoments FitMoments(std::span<const DimensionProfile> profiles,
                            double trim_fraction = kDefaultTrimFraction,
                            StdEstimator estimator = StdEstimator::kSample);

// Mean / standard deviation published for the original 326-model zoo.
DimensionMoments PublishedReferenceMoments();

// Line-delimited {"dimension", "mean", "std"} objects, one per dimension.
DimensionMoments ParseMoments(std::istream& in);
DimensionMoments LoadMomentsFile(const std::string& path);
std::string SerializeMoments(const DimensionMoments& moments);

class WeightConfig {
 public:
  // 1/3 for each robustness dimension, 1/2 for object focus and shape bias,
  // 1 for everything else.
  static WeightConfig Default();
  // Weight 1 on `d`, 0 elsewhere.
  static WeightConfig Only(Dimension d);

  double operator[](Dimension d) const { return w_[Index(d)]; }
  void Set(Dimension d, double w);
  double Sum() const;
  WeightConfig Scaled(double factor) const;
  // Throws kInvalidArgument for negative / non-finite weights or an all-zero vector.
  void Validate() const;

  bool operator==(const WeightConfig&) const = default;

 private:
  std::array<double, kNumDimensions> w_{};
};

// "key = value" lines; value may be a decimal or a fraction "a/b". Absent keys
// keep their defaults; '#' starts a comment.
WeightConfig ParseWeights(std::istream& in);
WeightConfig ParseWeights(std::string_view text);
WeightConfig LoadWeightsFile(const std::string& path);
std::string SerializeWeights(const WeightConfig& weights);

struct StandardizedProfile {
  std::string model_id;
  std::array<double, kNumDimensions> z{};

  double operator[](Dimension d) const { return z[Index(d)]; }

  bool operator==(const StandardizedProfile&) const = default;
};

// z = (s - mean) / std, negated for lower-is-better dimensions.
StandardizedProfile Standardize(const DimensionProfile& profile, const DimensionMoments& moments);

double QubaScore(const StandardizedProfile& z, const WeightConfig& weights);

struct RankEntry {
  std::string model_id;
  double score = 0.0;

  bool operator==(const RankEntry&) const = default;
};

// Descending score; equal scores ordered by model_id.
using Ranking = std::vector<RankEntry>;

Ranking RankModels(std::span<const DimensionProfile> profiles, const DimensionMoments& moments,
                   const WeightConfig& weights);

// Per-dimension mean z-score over the group (radar-chart profile).
StandardizedProfile GroupProfile(std::span<const DimensionProfile> profiles, const DimensionMoments& moments,
                                 std::string group_name = "group");

}  // namespace quba
