#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "quba/error.hpp"

namespace quba {

// ---------------------------------------------------------------------------
// Dataset kinds
// ---------------------------------------------------------------------------

enum class Family { kClean, kAttack, kCorruption, kOod, kMixedSame, kMixedRand, kCueConflict };
enum class AttackName { kFgsm, kPgd, kAutoAttack };
enum class OodName { kImagenetR, kImagenetSketch, kStylized, kEdge, kSilhouette };

inline constexpr Family kAllFamilies[] = {Family::kClean,     Family::kAttack,    Family::kCorruption,
                                          Family::kOod,       Family::kMixedSame, Family::kMixedRand,
                                          Family::kCueConflict};
inline constexpr OodName kAllOodNames[] = {OodName::kImagenetR, OodName::kImagenetSketch,
                                           OodName::kStylized, OodName::kEdge, OodName::kSilhouette};

std::string_view ToString(Family f);
std::string_view ToString(AttackName a);
std::string_view ToString(OodName o);
Family ParseFamily(std::string_view s);
AttackName ParseAttackName(std::string_view s);
OodName ParseOodName(std::string_view s);

// True for families whose records are labelled in a coarse category space.
bool UsesCoarseLabels(Family f);
// True for families whose records carry true_label / true_prob.
bool HasTrueLabel(Family f);

// Optional attack parameters an adapter may record in the manifest.
struct AttackParams {
  std::optional<double> epsilon;
  std::optional<std::int64_t> iterations;
  std::optional<double> step_size;

  bool operator==(const AttackParams&) const = default;
};

struct DatasetKind {
  Family family = Family::kClean;
  std::optional<AttackName> attack_name;
  std::optional<std::string> corruption_name;
  std::optional<int> severity;
  std::optional<OodName> ood_name;
  AttackParams attack_params;

  static DatasetKind Clean() { return {}; }
  static DatasetKind Attack(AttackName a);
  static DatasetKind Corruption(std::string name, int severity);
  static DatasetKind Ood(OodName o);
  static DatasetKind Of(Family f);  // families without conditional fields

  // Throws kSchemaMismatch / kRange if conditional fields do not match the family.
  void Validate() const;

  // Stable human-readable key, e.g. "corruption:fog:3".
  std::string Key() const;

  bool operator==(const DatasetKind&) const = default;
};

// ---------------------------------------------------------------------------
// Records and sets
// ---------------------------------------------------------------------------

struct PredictionRecord {
  std::string image_id;
  std::optional<int> true_label;
  std::optional<int> shape_label;
  std::optional<int> texture_label;
  int pred_label = 0;
  double confidence = 0.0;
  std::optional<double> true_prob;

  bool IsCorrect() const { return true_label && *true_label == pred_label; }

  bool operator==(const PredictionRecord&) const = default;
};

// Immutable, validated collection of records for one (model, dataset kind).
class EvaluationSet {
 public:
  // Validates every invariant; throws quba::Error on the first violation.
  static EvaluationSet Create(std::string model_id, DatasetKind kind, int num_classes,
                              std::vector<PredictionRecord> records);

  const std::string& model_id() const { return model_id_; }
  const DatasetKind& kind() const { return kind_; }
  Family family() const { return kind_.family; }
  int num_classes() const { return num_classes_; }
  const std::vector<PredictionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  bool operator==(const EvaluationSet&) const = default;

 private:
  EvaluationSet() = default;

  std::string model_id_;
  DatasetKind kind_;
  int num_classes_ = 0;
  std::vector<PredictionRecord> records_;
};

inline constexpr int kLogSchemaVersion = 1;

// Parses a prediction log: one manifest line, then one record per line.
// Errors carry the 1-based line number in their message.
EvaluationSet ParsePredictionLog(std::istream& in);
EvaluationSet ParsePredictionLog(std::string_view text);
// Reads a log from disk; ".gz" files are decompressed transparently.
EvaluationSet LoadPredictionLog(const std::string& path);

void WritePredictionLog(const EvaluationSet& set, std::ostream& out);
std::string SerializePredictionLog(const EvaluationSet& set);

// ---------------------------------------------------------------------------
// Model registry
// ---------------------------------------------------------------------------

enum class ArchitectureFamily { kCnn, kTransformer, kVil, kBcos, kOther };
enum class Paradigm {
  kSupervised,
  kAdversarial,
  kSelfSupLp,
  kSelfSupE2e,
  kSemiSupervised,
  kA1,
  kA2,
  kA3,
  kVil,
};

std::string_view ToString(ArchitectureFamily a);
std::string_view ToString(Paradigm p);
ArchitectureFamily ParseArchitectureFamily(std::string_view s);
Paradigm ParseParadigm(std::string_view s);

struct ModelCard {
  std::string model_id;
  ArchitectureFamily architecture_family = ArchitectureFamily::kOther;
  std::string train_dataset;
  Paradigm paradigm = Paradigm::kSupervised;
  double params_millions = 0.0;

  bool operator==(const ModelCard&) const = default;
};

class ModelRegistry {
 public:
  // Throws kDuplicate if the model_id is already present, kRange for
  // non-positive params_millions.
  void Add(ModelCard card);

  const ModelCard* Find(std::string_view model_id) const;
  const ModelCard& At(std::string_view model_id) const;
  bool Contains(std::string_view model_id) const { return Find(model_id) != nullptr; }

  // Insertion order.
  const std::vector<ModelCard>& cards() const { return cards_; }
  std::size_t size() const { return cards_.size(); }

 private:
  std::vector<ModelCard> cards_;
  std::unordered_map<std::string, std::size_t> index_;
};

ModelRegistry LoadModelRegistry(std::istream& in);
ModelRegistry LoadModelRegistry(std::string_view text);
ModelRegistry LoadModelRegistryFile(const std::string& path);
void WriteModelRegistry(const ModelRegistry& registry, std::ostream& out);
std::string SerializeModelCard(const ModelCard& card);

// ---------------------------------------------------------------------------
// Bundles and validation
// ---------------------------------------------------------------------------

// All evaluation sets for one model, split by role.
struct ModelBundle {
  std::string model_id;
  std::optional<EvaluationSet> clean;
  std::optional<EvaluationSet> fgsm;
  std::optional<EvaluationSet> pgd;
  std::vector<EvaluationSet> corruption;
  std::vector<EvaluationSet> ood;
  std::optional<EvaluationSet> mixed_same;
  std::optional<EvaluationSet> mixed_rand;
  std::optional<EvaluationSet> cue_conflict;
};

// Groups sets by model_id (sorted by model_id). Sets that do not fit a bundle
// slot (autoattack logs, duplicated single-slot kinds) are dropped here and
// surface as findings in ValidateBundle.
std::map<std::string, ModelBundle> GroupByModel(const std::vector<EvaluationSet>& sets);

struct ModelValidation {
  std::string model_id;
  bool registered = false;
  // Input tags that are absent: "clean", "fgsm", "pgd", "corruption",
  // "ood:<name>", "mixed-same", "mixed-rand", "cue-conflict".
  std::vector<std::string> missing_inputs;
  // Additional findings: duplicated inputs, unused sets.
  std::vector<std::string> findings;
  // Per quality dimension: empty when computable, otherwise
  // "incomplete: <input>[, <input>...]".
  std::map<std::string, std::string> dimension_status;

  bool operator==(const ModelValidation&) const = default;
};

struct ValidationReport {
  std::vector<ModelValidation> models;  // sorted by model_id
  // Registered models with no evaluation sets at all.
  std::vector<std::string> models_without_sets;

  bool operator==(const ValidationReport&) const = default;

  bool AllComplete() const;
};

ValidationReport ValidateBundle(const std::vector<EvaluationSet>& sets, const ModelRegistry& registry);

}  // namespace quba
