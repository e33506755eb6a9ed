#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quba/aggregate.hpp"
#include "quba/dimensions.hpp"
#include "quba/metrics.hpp"

namespace quba {

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

// I_x(a, b), continued-fraction evaluation (modified Lentz).
double RegularizedIncompleteBeta(double x, double a, double b);
double StudentTCdf(double t, double dof);
// P(|T| >= |t|) for T ~ t(dof).
double StudentTTwoSidedP(double t, double dof);

// ---------------------------------------------------------------------------
// Rank correlation
// ---------------------------------------------------------------------------

// 1-based ranks; tied values receive the average of their positions.
std::vector<double> AverageRanks(std::span<const double> values);

struct Correlation {
  double rho = 0.0;
  double p = 1.0;

  bool operator==(const Correlation&) const = default;
};

// Spearman's rho with a two-sided p-value from the t approximation
// t = rho * sqrt((n - 2) / (1 - rho^2)), n - 2 degrees of freedom.
Correlation Spearman(std::span<const double> xs, std::span<const double> ys);

// Exact two-sided permutation p-value (all n! rank permutations), n <= 10.
double SpearmanExactPValue(std::span<const double> xs, std::span<const double> ys);

inline constexpr double kSignificanceLevel = 0.05;

struct CorrelationMatrix {
  std::array<std::array<Correlation, kNumDimensions>, kNumDimensions> cells{};
  std::array<std::array<bool, kNumDimensions>, kNumDimensions> significant{};
  std::size_t num_models = 0;

  const Correlation& At(Dimension a, Dimension b) const { return cells[Index(a)][Index(b)]; }
};

CorrelationMatrix ComputeCorrelationMatrix(std::span<const DimensionProfile> profiles);

// ---------------------------------------------------------------------------
// Group comparison
// ---------------------------------------------------------------------------

enum class Stars { kNone = 0, kOne = 1, kTwo = 2, kThree = 3 };

// *** for p < 0.05, ** for p < 0.1, * for p < 0.2 (strict inequalities).
Stars StarsForP(double p);
std::string_view ToString(Stars s);

enum class TTestKind { kPaired, kWelch };
std::string_view ToString(TTestKind k);

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
};

// Two-sided tests. A zero-variance difference yields p = 0 when the mean
// difference is non-zero and p = 1 when it is zero.
TTestResult PairedTTest(std::span<const double> a, std::span<const double> b);
TTestResult WelchTTest(std::span<const double> a, std::span<const double> b);

struct ProfileGroup {
  std::string name;
  std::vector<DimensionProfile> members;
};

struct ComparisonTable {
  TTestKind test = TTestKind::kWelch;
  std::vector<std::string> group_names;
  std::vector<std::size_t> group_sizes;
  // means[g][d]
  std::vector<std::array<double, kNumDimensions>> means;
  // tests[g][d] for g >= 1, comparing group g to group 0; tests[0] is unused.
  std::vector<std::array<TTestResult, kNumDimensions>> tests;
  std::vector<std::array<Stars, kNumDimensions>> stars;
  // Index of the group with the best mean per dimension (orientation-aware).
  std::array<std::size_t, kNumDimensions> best_group{};
};

ComparisonTable GroupCompare(std::span<const ProfileGroup> groups, bool paired);

// ---------------------------------------------------------------------------
// Bootstrap stability of the ranking
// ---------------------------------------------------------------------------

struct StabilityOptions {
  std::size_t sample_size = 100;
  std::size_t repetitions = 5;
  std::uint64_t seed = 0;
  double trim_fraction = kDefaultTrimFraction;
  unsigned jobs = 1;
};

struct PairCorrelation {
  std::size_t rep_a = 0;
  std::size_t rep_b = 0;
  double rho = 0.0;
};

struct StabilityResult {
  double mean_correlation = 0.0;
  std::vector<PairCorrelation> pairs;
  // Sampled model ids per repetition, sorted.
  std::vector<std::vector<std::string>> samples;
};

// Deterministic 64-bit generator (SplitMix64) with an unbiased bounded draw,
// so sampling is reproducible across standard libraries.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t Next();
  // Uniform integer in [0, bound).
  std::uint64_t Below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

// Samples `sample_size` models per repetition, refits moments on the sample,
// scores the full zoo under them and correlates the repetitions' rankings.
StabilityResult StabilityBootstrap(std::span<const DimensionProfile> profiles, const WeightConfig& weights,
                                   const StabilityOptions& options);

}  // namespace quba
