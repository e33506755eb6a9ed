#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quba/aggregate.hpp"
#include "quba/metrics.hpp"
#include "quba/records.hpp"
#include "quba/stats.hpp"

namespace quba {

inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr int kBundleSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Canonical line-delimited serializations. Doubles are written in shortest
// round-trip form so re-reading reproduces the exact values.
// ---------------------------------------------------------------------------

std::string SerializeProfiles(std::span<const DimensionProfile> profiles);
std::vector<DimensionProfile> ParseProfiles(std::string_view text);
std::vector<DimensionProfile> LoadProfilesFile(const std::string& path);

std::string SerializeRanking(const Ranking& ranking);
Ranking ParseRanking(std::string_view text);

std::string SerializeCorrelation(const CorrelationMatrix& matrix);
std::string SerializeComparison(const ComparisonTable& table);
std::string SerializeStability(const StabilityResult& result, const StabilityOptions& options);
std::string SerializeValidation(const ValidationReport& report);

// Human-readable renderings (--pretty).
std::string PrettyValidation(const ValidationReport& report);
std::string PrettyRanking(const Ranking& ranking);
std::string PrettyCorrelation(const CorrelationMatrix& matrix);
std::string PrettyComparison(const ComparisonTable& table);

// ---------------------------------------------------------------------------
// Registry filters: comma-separated conjunction of `tag:value` terms over
// ModelCard fields (architecture_family|arch, train_dataset|train, paradigm,
// model_id) and `params<X` / `params>X` comparisons.
// ---------------------------------------------------------------------------

class ModelFilter {
 public:
  static ModelFilter Parse(std::string_view expression);
  bool Matches(const ModelCard& card) const;
  const std::string& expression() const { return expression_; }

 private:
  std::string expression_;
  std::vector<std::function<bool(const ModelCard&)>> terms_;
};

// Parses "name=expression".
std::pair<std::string, ModelFilter> ParseGroupSpec(std::string_view spec);

// Members follow registry insertion order, which defines pairing.
ProfileGroup SelectGroup(const std::string& name, const ModelFilter& filter, const ModelRegistry& registry,
                         std::span<const DimensionProfile> profiles);

// ---------------------------------------------------------------------------
// Pipeline helpers
// ---------------------------------------------------------------------------

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first error.
void ParallelFor(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

// Loads every *.jsonl / *.jsonl.gz / *.log / *.log.gz file under `dir`
// (non-recursive), in sorted path order.
std::vector<EvaluationSet> LoadLogDirectory(const std::string& dir, unsigned jobs);

// Profiles for every registered model that has evaluation sets, sorted by model_id.
std::vector<DimensionProfile> ScoreBundles(const std::vector<EvaluationSet>& sets, const ModelRegistry& registry,
                                           unsigned jobs);

struct ReportBundle {
  ModelRegistry registry;
  std::vector<DimensionProfile> profiles;
  DimensionMoments moments;
  WeightConfig weights = WeightConfig::Default();
  Ranking ranking;
  std::optional<CorrelationMatrix> correlation;
  std::vector<ComparisonTable> comparisons;
  std::optional<std::pair<StabilityResult, StabilityOptions>> stability;
};

// Checks that every ranked model has a profile and vice versa.
void CheckConsistency(const ReportBundle& bundle);
// Single JSON document; no timestamp (kept in a sidecar by the CLI).
std::string SerializeReportBundle(const ReportBundle& bundle);

}  // namespace quba
