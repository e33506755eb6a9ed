#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quba/dimensions.hpp"
#include "quba/records.hpp"

namespace quba {

// Raw quality-dimension scores for one model. Unavailable dimensions are
// empty optionals; params is always present once built from a ModelCard.
class DimensionProfile {
 public:
  DimensionProfile() = default;
  explicit DimensionProfile(std::string model_id) : model_id_(std::move(model_id)) {}

  const std::string& model_id() const { return model_id_; }

  const std::optional<double>& operator[](Dimension d) const { return values_[Index(d)]; }
  std::optional<double>& operator[](Dimension d) { return values_[Index(d)]; }

  bool Complete() const;
  // Throws kUnavailable when the dimension is missing.
  double Value(Dimension d) const;
  // Throws kRange if any present value violates its documented range.
  void CheckRanges() const;

  bool operator==(const DimensionProfile&) const = default;

 private:
  std::string model_id_;
  std::array<std::optional<double>, kNumDimensions> values_{};
};

inline constexpr int kDefaultCalibrationBins = 15;

// (prod v_i)^(1/n), evaluated in the log domain; 0 if any value is 0.
double GeometricMean(std::span<const double> values);
inline double GeometricMean(std::initializer_list<double> values) {
  return GeometricMean(std::span<const double>(values.begin(), values.size()));
}

double Top1Accuracy(const EvaluationSet& set);

double AdversarialRobustness(const EvaluationSet& clean, const EvaluationSet& fgsm, const EvaluationSet& pgd);
double CorruptionRobustness(const EvaluationSet& clean, std::span<const EvaluationSet> corrupted);
double OodRobustness(const EvaluationSet& clean, std::span<const EvaluationSet> ood_sets);

// Index of the equal-width bin holding `confidence`; boundaries belong to the
// upper bin and 1.0 falls in the last bin.
int ConfidenceBin(double confidence, int bins);

double ExpectedCalibrationError(const EvaluationSet& set, int bins = kDefaultCalibrationBins);
double AdaptiveCalibrationError(const EvaluationSet& set, int ranges = kDefaultCalibrationBins);
double CalibrationError(const EvaluationSet& set);

struct ClassBalanceParts {
  double accuracy_balance;    // 1 - population std of per-class accuracy
  double confidence_balance;  // 1 - population std of per-class mean true_prob
  double combined;            // geometric mean of the two
};
ClassBalanceParts ClassBalanceComponents(const EvaluationSet& set);
double ClassBalance(const EvaluationSet& set);

double ObjectFocus(const EvaluationSet& mixed_same, const EvaluationSet& mixed_rand);
double ShapeBias(const EvaluationSet& set);

// Assembles every computable dimension; dimensions whose inputs are missing
// stay unavailable.
DimensionProfile BuildDimensionProfile(const ModelBundle& bundle, const ModelCard& card);

}  // namespace quba
