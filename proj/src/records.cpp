#include "quba/records.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "quba/dimensions.hpp"

namespace quba {

using ojson = nlohmann::ordered_json;

const char* ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kRange: return "range_error";
    case ErrorCode::kSchemaMismatch: return "schema_mismatch";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kLabelRange: return "label_out_of_range";
    case ErrorCode::kUnknownTag: return "unknown_tag";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kUndefined: return "undefined";
    case ErrorCode::kZeroVariance: return "zero_variance";
    case ErrorCode::kUnavailable: return "unavailable";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

namespace {

template <typename E, std::size_t N>
E ParseTag(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
           std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw Error(ErrorCode::kUnknownTag, "unknown " + std::string(what) + " tag '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view TagName(E e, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == e) return name;
  }
  return "?";
}

constexpr std::array<std::pair<std::string_view, Family>, 7> kFamilyTags = {{
    {"clean", Family::kClean},
    {"attack", Family::kAttack},
    {"corruption", Family::kCorruption},
    {"ood", Family::kOod},
    {"mixed-same", Family::kMixedSame},
    {"mixed-rand", Family::kMixedRand},
    {"cue-conflict", Family::kCueConflict},
}};

constexpr std::array<std::pair<std::string_view, AttackName>, 3> kAttackTags = {{
    {"fgsm", AttackName::kFgsm},
    {"pgd", AttackName::kPgd},
    {"autoattack", AttackName::kAutoAttack},
}};

constexpr std::array<std::pair<std::string_view, OodName>, 5> kOodTags = {{
    {"imagenet-r", OodName::kImagenetR},
    {"imagenet-sketch", OodName::kImagenetSketch},
    {"stylized", OodName::kStylized},
    {"edge", OodName::kEdge},
    {"silhouette", OodName::kSilhouette},
}};

constexpr std::array<std::pair<std::string_view, ArchitectureFamily>, 5> kArchTags = {{
    {"cnn", ArchitectureFamily::kCnn},
    {"transformer", ArchitectureFamily::kTransformer},
    {"vil", ArchitectureFamily::kVil},
    {"bcos", ArchitectureFamily::kBcos},
    {"other", ArchitectureFamily::kOther},
}};

constexpr std::array<std::pair<std::string_view, Paradigm>, 9> kParadigmTags = {{
    {"supervised", Paradigm::kSupervised},
    {"adversarial", Paradigm::kAdversarial},
    {"self-sup-lp", Paradigm::kSelfSupLp},
    {"self-sup-e2e", Paradigm::kSelfSupE2e},
    {"semi-supervised", Paradigm::kSemiSupervised},
    {"a1", Paradigm::kA1},
    {"a2", Paradigm::kA2},
    {"a3", Paradigm::kA3},
    {"vil", Paradigm::kVil},
}};

}  // namespace

std::string_view ToString(Family f) { return TagName(f, kFamilyTags); }
std::string_view ToString(AttackName a) { return TagName(a, kAttackTags); }
std::string_view ToString(OodName o) { return TagName(o, kOodTags); }
std::string_view ToString(ArchitectureFamily a) { return TagName(a, kArchTags); }
std::string_view ToString(Paradigm p) { return TagName(p, kParadigmTags); }
Family ParseFamily(std::string_view s) { return ParseTag(s, kFamilyTags, "family"); }
AttackName ParseAttackName(std::string_view s) { return ParseTag(s, kAttackTags, "attack_name"); }
OodName ParseOodName(std::string_view s) { return ParseTag(s, kOodTags, "ood_name"); }
ArchitectureFamily ParseArchitectureFamily(std::string_view s) {
  return ParseTag(s, kArchTags, "architecture_family");
}
Paradigm ParseParadigm(std::string_view s) { return ParseTag(s, kParadigmTags, "paradigm"); }

bool UsesCoarseLabels(Family f) {
  return f == Family::kCueConflict || f == Family::kMixedSame || f == Family::kMixedRand;
}

bool HasTrueLabel(Family f) { return f != Family::kCueConflict; }

// ---------------------------------------------------------------------------
// DatasetKind
// ---------------------------------------------------------------------------

DatasetKind DatasetKind::Attack(AttackName a) {
  DatasetKind k;
  k.family = Family::kAttack;
  k.attack_name = a;
  return k;
}

DatasetKind DatasetKind::Corruption(std::string name, int severity) {
  DatasetKind k;
  k.family = Family::kCorruption;
  k.corruption_name = std::move(name);
  k.severity = severity;
  return k;
}

DatasetKind DatasetKind::Ood(OodName o) {
  DatasetKind k;
  k.family = Family::kOod;
  k.ood_name = o;
  return k;
}

DatasetKind DatasetKind::Of(Family f) {
  DatasetKind k;
  k.family = f;
  return k;
}

void DatasetKind::Validate() const {
  auto require = [&](bool present, bool needed, const char* field) {
    if (present != needed) {
      throw Error(ErrorCode::kSchemaMismatch,
                  std::string("field '") + field + "' " + (needed ? "required" : "not allowed") +
                      " for family '" + std::string(ToString(family)) + "'");
    }
  };
  require(attack_name.has_value(), family == Family::kAttack, "attack_name");
  require(corruption_name.has_value(), family == Family::kCorruption, "corruption_name");
  require(severity.has_value(), family == Family::kCorruption, "severity");
  require(ood_name.has_value(), family == Family::kOod, "ood_name");
  const bool has_params = attack_params.epsilon || attack_params.iterations || attack_params.step_size;
  if (has_params && family != Family::kAttack) {
    throw Error(ErrorCode::kSchemaMismatch, "attack parameters only allowed for family 'attack'");
  }
  if (severity && (*severity < 1 || *severity > 5)) {
    throw Error(ErrorCode::kRange, "severity must be in [1, 5], got " + std::to_string(*severity));
  }
  if (corruption_name && corruption_name->empty()) {
    throw Error(ErrorCode::kRange, "corruption_name must be non-empty");
  }
  if (attack_params.epsilon && !(*attack_params.epsilon > 0.0)) {
    throw Error(ErrorCode::kRange, "epsilon must be > 0");
  }
  if (attack_params.step_size && !(*attack_params.step_size > 0.0)) {
    throw Error(ErrorCode::kRange, "step_size must be > 0");
  }
  if (attack_params.iterations && *attack_params.iterations < 1) {
    throw Error(ErrorCode::kRange, "iterations must be >= 1");
  }
}

std::string DatasetKind::Key() const {
  std::string key(ToString(family));
  if (attack_name) key += ":" + std::string(ToString(*attack_name));
  if (corruption_name) key += ":" + *corruption_name + ":" + std::to_string(severity.value_or(0));
  if (ood_name) key += ":" + std::string(ToString(*ood_name));
  return key;
}

// ---------------------------------------------------------------------------
// EvaluationSet
// ---------------------------------------------------------------------------

namespace {

void CheckProbability(double v, const char* field) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    std::ostringstream os;
    os << "field '" << field << "' must be in [0, 1], got " << v;
    throw Error(ErrorCode::kRange, os.str());
  }
}

void CheckLabel(int label, int num_classes, const char* field) {
  if (label < 0 || label >= num_classes) {
    throw Error(ErrorCode::kLabelRange, std::string("field '") + field + "' = " + std::to_string(label) +
                                            " outside [0, " + std::to_string(num_classes) + ")");
  }
}

void ValidateRecord(const PredictionRecord& r, Family family, int num_classes) {
  if (r.image_id.empty()) throw Error(ErrorCode::kRange, "field 'image_id' must be non-empty");
  auto presence = [&](bool present, bool needed, const char* field) {
    if (present != needed) {
      throw Error(ErrorCode::kSchemaMismatch,
                  std::string("record field '") + field + "' " + (needed ? "missing" : "not allowed") +
                      " for family '" + std::string(ToString(family)) + "'");
    }
  };
  const bool labelled = HasTrueLabel(family);
  presence(r.true_label.has_value(), labelled, "true_label");
  presence(r.true_prob.has_value(), labelled, "true_prob");
  presence(r.shape_label.has_value(), !labelled, "shape_label");
  presence(r.texture_label.has_value(), !labelled, "texture_label");

  CheckLabel(r.pred_label, num_classes, "pred_label");
  CheckProbability(r.confidence, "confidence");
  if (labelled) {
    CheckLabel(*r.true_label, num_classes, "true_label");
    CheckProbability(*r.true_prob, "true_prob");
    if (*r.true_prob > r.confidence) {
      throw Error(ErrorCode::kRange, "field 'true_prob' exceeds 'confidence'");
    }
  } else {
    CheckLabel(*r.shape_label, num_classes, "shape_label");
    CheckLabel(*r.texture_label, num_classes, "texture_label");
    if (*r.shape_label == *r.texture_label) {
      throw Error(ErrorCode::kSchemaMismatch, "shape_label and texture_label must differ");
    }
  }
}

}  // namespace

EvaluationSet EvaluationSet::Create(std::string model_id, DatasetKind kind, int num_classes,
                                    std::vector<PredictionRecord> records) {
  if (model_id.empty()) throw Error(ErrorCode::kRange, "model_id must be non-empty");
  kind.Validate();
  if (num_classes <= 0) throw Error(ErrorCode::kRange, "num_classes must be positive");
  if (records.empty()) throw Error(ErrorCode::kRange, "evaluation set has no records");
  std::unordered_set<std::string_view> ids;
  ids.reserve(records.size());
  for (const auto& r : records) {
    ValidateRecord(r, kind.family, num_classes);
    if (!ids.insert(r.image_id).second) {
      throw Error(ErrorCode::kDuplicate, "duplicate image_id '" + r.image_id + "'");
    }
  }
  EvaluationSet set;
  set.model_id_ = std::move(model_id);
  set.kind_ = std::move(kind);
  set.num_classes_ = num_classes;
  set.records_ = std::move(records);
  return set;
}

// ---------------------------------------------------------------------------
// Log parsing
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void Fail(ErrorCode code, std::size_t line, const std::string& what) {
  throw Error(code, "line " + std::to_string(line) + ": " + what);
}

bool IsBlank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

ojson ParseObject(const std::string& line) {
  ojson j = ojson::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(ErrorCode::kParse, "malformed JSON object");
  if (!j.is_object()) throw Error(ErrorCode::kParse, "expected a JSON object");
  return j;
}

std::string GetString(const ojson& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchemaMismatch, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw Error(ErrorCode::kParse, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::int64_t GetInteger(const ojson& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchemaMismatch, std::string("missing field '") + key + "'");
  if (!it->is_number_integer()) {
    throw Error(ErrorCode::kParse, std::string("field '") + key + "' must be an integer");
  }
  return it->get<std::int64_t>();
}

int GetLabel(const ojson& j, const char* key) {
  const std::int64_t v = GetInteger(j, key);
  if (v < 0 || v > std::numeric_limits<int>::max()) {
    throw Error(ErrorCode::kLabelRange, std::string("field '") + key + "' out of range");
  }
  return static_cast<int>(v);
}

double GetNumber(const ojson& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchemaMismatch, std::string("missing field '") + key + "'");
  if (!it->is_number()) throw Error(ErrorCode::kParse, std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

void RejectUnknownKeys(const ojson& j, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::kSchemaMismatch, "unexpected field '" + key + "'");
    }
  }
}

struct Manifest {
  std::string model_id;
  DatasetKind kind;
  int num_classes = 0;
};

Manifest ParseManifest(const ojson& j) {
  RejectUnknownKeys(j, {"schema_version", "model_id", "family", "num_classes", "attack_name",
                        "corruption_name", "severity", "ood_name", "epsilon", "iterations", "step_size"});
  const std::int64_t version = GetInteger(j, "schema_version");
  if (version != kLogSchemaVersion) {
    throw Error(ErrorCode::kSchemaMismatch, "unsupported schema_version " + std::to_string(version));
  }
  Manifest m;
  m.model_id = GetString(j, "model_id");
  m.kind.family = ParseFamily(GetString(j, "family"));
  const std::int64_t classes = GetInteger(j, "num_classes");
  if (classes <= 0 || classes > std::numeric_limits<int>::max()) {
    throw Error(ErrorCode::kRange, "num_classes must be positive");
  }
  m.num_classes = static_cast<int>(classes);
  if (j.contains("attack_name")) m.kind.attack_name = ParseAttackName(GetString(j, "attack_name"));
  if (j.contains("corruption_name")) m.kind.corruption_name = GetString(j, "corruption_name");
  if (j.contains("severity")) {
    const std::int64_t s = GetInteger(j, "severity");
    if (s < 1 || s > 5) throw Error(ErrorCode::kRange, "severity must be in [1, 5]");
    m.kind.severity = static_cast<int>(s);
  }
  if (j.contains("ood_name")) m.kind.ood_name = ParseOodName(GetString(j, "ood_name"));
  if (j.contains("epsilon")) m.kind.attack_params.epsilon = GetNumber(j, "epsilon");
  if (j.contains("iterations")) m.kind.attack_params.iterations = GetInteger(j, "iterations");
  if (j.contains("step_size")) m.kind.attack_params.step_size = GetNumber(j, "step_size");
  m.kind.Validate();
  return m;
}

PredictionRecord ParseRecord(const ojson& j, Family family, int num_classes) {
  PredictionRecord r;
  // Presence is checked before parsing so that a misplaced field reports as a
  // schema mismatch rather than as a missing one.
  const bool labelled = HasTrueLabel(family);
  auto presence = [&](const char* key, bool needed) {
    if (j.contains(key) != needed) {
      throw Error(ErrorCode::kSchemaMismatch,
                  std::string("record field '") + key + "' " + (needed ? "missing" : "not allowed") +
                      " for family '" + std::string(ToString(family)) + "'");
    }
  };
  presence("true_label", labelled);
  presence("true_prob", labelled);
  presence("shape_label", !labelled);
  presence("texture_label", !labelled);
  if (labelled) {
    RejectUnknownKeys(j, {"image_id", "true_label", "pred_label", "confidence", "true_prob"});
  } else {
    RejectUnknownKeys(j, {"image_id", "shape_label", "texture_label", "pred_label", "confidence"});
  }

  r.image_id = GetString(j, "image_id");
  if (labelled) {
    r.true_label = GetLabel(j, "true_label");
  } else {
    r.shape_label = GetLabel(j, "shape_label");
    r.texture_label = GetLabel(j, "texture_label");
  }
  r.pred_label = GetLabel(j, "pred_label");
  r.confidence = GetNumber(j, "confidence");
  if (labelled) r.true_prob = GetNumber(j, "true_prob");
  ValidateRecord(r, family, num_classes);
  return r;
}

std::string ReadFileMaybeGzip(const std::string& path) {
  const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  if (!gz) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::string out;
  std::array<char, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(f);
      throw Error(ErrorCode::kIo, "gzip read failure in '" + path + "'");
    }
    if (n == 0) break;
    out.append(buf.data(), static_cast<std::size_t>(n));
  }
  gzclose(f);
  return out;
}

}  // namespace

EvaluationSet ParsePredictionLog(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<Manifest> manifest;
  std::vector<PredictionRecord> records;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsBlank(line)) continue;
    try {
      const ojson j = ParseObject(line);
      if (!manifest) {
        manifest = ParseManifest(j);
        continue;
      }
      PredictionRecord r = ParseRecord(j, manifest->kind.family, manifest->num_classes);
      if (!ids.insert(r.image_id).second) {
        throw Error(ErrorCode::kDuplicate, "duplicate image_id '" + r.image_id + "'");
      }
      records.push_back(std::move(r));
    } catch (const Error& e) {
      Fail(e.code(), line_no, e.what());
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorCode::kParse, line_no, e.what());
    }
  }
  if (!manifest) throw Error(ErrorCode::kParse, "empty log: missing manifest line");
  if (records.empty()) throw Error(ErrorCode::kRange, "log contains no records");
  return EvaluationSet::Create(std::move(manifest->model_id), std::move(manifest->kind),
                               manifest->num_classes, std::move(records));
}

EvaluationSet ParsePredictionLog(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ParsePredictionLog(in);
}

EvaluationSet LoadPredictionLog(const std::string& path) {
  try {
    return ParsePredictionLog(std::string_view(ReadFileMaybeGzip(path)));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void WritePredictionLog(const EvaluationSet& set, std::ostream& out) {
  const DatasetKind& k = set.kind();
  ojson m;
  m["schema_version"] = kLogSchemaVersion;
  m["model_id"] = set.model_id();
  m["family"] = ToString(k.family);
  m["num_classes"] = set.num_classes();
  if (k.attack_name) m["attack_name"] = ToString(*k.attack_name);
  if (k.corruption_name) m["corruption_name"] = *k.corruption_name;
  if (k.severity) m["severity"] = *k.severity;
  if (k.ood_name) m["ood_name"] = ToString(*k.ood_name);
  if (k.attack_params.epsilon) m["epsilon"] = *k.attack_params.epsilon;
  if (k.attack_params.iterations) m["iterations"] = *k.attack_params.iterations;
  if (k.attack_params.step_size) m["step_size"] = *k.attack_params.step_size;
  out << m.dump() << '\n';
  for (const auto& r : set.records()) {
    ojson j;
    j["image_id"] = r.image_id;
    if (r.true_label) {
      j["true_label"] = *r.true_label;
    } else {
      j["shape_label"] = *r.shape_label;
      j["texture_label"] = *r.texture_label;
    }
    j["pred_label"] = r.pred_label;
    j["confidence"] = r.confidence;
    if (r.true_prob) j["true_prob"] = *r.true_prob;
    out << j.dump() << '\n';
  }
}

std::string SerializePredictionLog(const EvaluationSet& set) {
  std::ostringstream os;
  WritePredictionLog(set, os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

void ModelRegistry::Add(ModelCard card) {
  if (card.model_id.empty()) throw Error(ErrorCode::kRange, "model_id must be non-empty");
  if (!std::isfinite(card.params_millions) || card.params_millions <= 0.0) {
    throw Error(ErrorCode::kRange, "params_millions must be positive for '" + card.model_id + "'");
  }
  if (index_.count(card.model_id) != 0) {
    throw Error(ErrorCode::kDuplicate, "duplicate model_id '" + card.model_id + "'");
  }
  index_.emplace(card.model_id, cards_.size());
  cards_.push_back(std::move(card));
}

const ModelCard* ModelRegistry::Find(std::string_view model_id) const {
  auto it = index_.find(std::string(model_id));
  return it == index_.end() ? nullptr : &cards_[it->second];
}

const ModelCard& ModelRegistry::At(std::string_view model_id) const {
  const ModelCard* card = Find(model_id);
  if (card == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "model '" + std::string(model_id) + "' not in registry");
  }
  return *card;
}

ModelRegistry LoadModelRegistry(std::istream& in) {
  ModelRegistry registry;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsBlank(line)) continue;
    try {
      const ojson j = ParseObject(line);
      RejectUnknownKeys(j, {"model_id", "architecture_family", "train_dataset", "paradigm", "params_millions"});
      ModelCard card;
      card.model_id = GetString(j, "model_id");
      card.architecture_family = ParseArchitectureFamily(GetString(j, "architecture_family"));
      card.train_dataset = GetString(j, "train_dataset");
      card.paradigm = ParseParadigm(GetString(j, "paradigm"));
      card.params_millions = GetNumber(j, "params_millions");
      registry.Add(std::move(card));
    } catch (const Error& e) {
      Fail(e.code(), line_no, e.what());
    }
  }
  return registry;
}

ModelRegistry LoadModelRegistry(std::string_view text) {
  std::istringstream in{std::string(text)};
  return LoadModelRegistry(in);
}

ModelRegistry LoadModelRegistryFile(const std::string& path) {
  try {
    return LoadModelRegistry(std::string_view(ReadFileMaybeGzip(path)));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string SerializeModelCard(const ModelCard& card) {
  ojson j;
  j["model_id"] = card.model_id;
  j["architecture_family"] = ToString(card.architecture_family);
  j["train_dataset"] = card.train_dataset;
  j["paradigm"] = ToString(card.paradigm);
  j["params_millions"] = card.params_millions;
  return j.dump();
}

void WriteModelRegistry(const ModelRegistry& registry, std::ostream& out) {
  for (const auto& card : registry.cards()) out << SerializeModelCard(card) << '\n';
}

// ---------------------------------------------------------------------------
// Bundles
// ---------------------------------------------------------------------------

std::map<std::string, ModelBundle> GroupByModel(const std::vector<EvaluationSet>& sets) {
  std::map<std::string, ModelBundle> bundles;
  std::set<std::pair<std::string, std::string>> seen_keys;
  for (const auto& s : sets) {
    ModelBundle& b = bundles[s.model_id()];
    b.model_id = s.model_id();
    if (!seen_keys.emplace(s.model_id(), s.kind().Key()).second) continue;
    const DatasetKind& k = s.kind();
    switch (k.family) {
      case Family::kClean: b.clean = s; break;
      case Family::kAttack:
        if (k.attack_name == AttackName::kFgsm) b.fgsm = s;
        if (k.attack_name == AttackName::kPgd) b.pgd = s;
        break;
      case Family::kCorruption: b.corruption.push_back(s); break;
      case Family::kOod: b.ood.push_back(s); break;
      case Family::kMixedSame: b.mixed_same = s; break;
      case Family::kMixedRand: b.mixed_rand = s; break;
      case Family::kCueConflict: b.cue_conflict = s; break;
    }
  }
  return bundles;
}

bool ValidationReport::AllComplete() const {
  if (!models_without_sets.empty()) return false;
  for (const auto& m : models) {
    if (!m.registered || !m.missing_inputs.empty()) return false;
    for (const auto& [dim, status] : m.dimension_status) {
      if (!status.empty()) return false;
    }
  }
  return true;
}

ValidationReport ValidateBundle(const std::vector<EvaluationSet>& sets, const ModelRegistry& registry) {
  std::map<std::string, std::map<std::string, int>> key_counts;  // model -> kind key -> count
  std::map<std::string, const EvaluationSet*> first_clean;
  for (const auto& s : sets) {
    ++key_counts[s.model_id()][s.kind().Key()];
    if (s.family() == Family::kClean) first_clean.emplace(s.model_id(), &s);
  }

  ValidationReport report;
  for (const auto& [model_id, counts] : key_counts) {
    ModelValidation mv;
    mv.model_id = model_id;
    mv.registered = registry.Contains(model_id);
    if (!mv.registered) mv.findings.push_back("unregistered model");

    auto count_prefix = [&](const std::string& prefix) {
      int n = 0;
      for (const auto& [key, c] : counts) {
        if (key.rfind(prefix, 0) == 0) n += c;
      }
      return n;
    };
    auto has = [&](const std::string& key) { return counts.count(key) != 0; };

    const bool clean = has("clean");
    const bool fgsm = has("attack:fgsm");
    const bool pgd = has("attack:pgd");
    const bool corruption = count_prefix("corruption:") > 0;
    const bool mixed_same = has("mixed-same");
    const bool mixed_rand = has("mixed-rand");
    const bool cue = has("cue-conflict");
    std::vector<std::string> missing_ood;
    for (OodName o : kAllOodNames) {
      const std::string key = "ood:" + std::string(ToString(o));
      if (!has(key)) missing_ood.push_back(key);
    }

    if (!clean) mv.missing_inputs.push_back("clean");
    if (!fgsm) mv.missing_inputs.push_back("fgsm");
    if (!pgd) mv.missing_inputs.push_back("pgd");
    if (!corruption) mv.missing_inputs.push_back("corruption");
    for (const auto& k : missing_ood) mv.missing_inputs.push_back(k);
    if (!mixed_same) mv.missing_inputs.push_back("mixed-same");
    if (!mixed_rand) mv.missing_inputs.push_back("mixed-rand");
    if (!cue) mv.missing_inputs.push_back("cue-conflict");

    for (const auto& [key, c] : counts) {
      if (c > 1) mv.findings.push_back("duplicate: " + key + " (" + std::to_string(c) + " sets)");
      if (key == "attack:autoattack") mv.findings.push_back("unused: " + key);
    }

    bool class_coverage = true;
    if (auto it = first_clean.find(model_id); it != first_clean.end()) {
      const EvaluationSet& s = *it->second;
      std::vector<char> covered(static_cast<std::size_t>(s.num_classes()), 0);
      for (const auto& r : s.records()) covered[static_cast<std::size_t>(*r.true_label)] = 1;
      const auto uncovered = std::count(covered.begin(), covered.end(), 0);
      if (uncovered > 0) {
        class_coverage = false;
        mv.findings.push_back("class coverage: " + std::to_string(uncovered) + " classes without records");
      }
    }

    auto status = [](std::initializer_list<std::pair<bool, std::string>> needs) {
      std::string out;
      for (const auto& [ok, name] : needs) {
        if (ok) continue;
        out += out.empty() ? "incomplete: " : ", ";
        out += name;
      }
      return out;
    };
    std::string ood_status;
    {
      std::string missing = clean ? "" : "clean";
      for (const auto& k : missing_ood) missing += (missing.empty() ? "" : ", ") + k;
      ood_status = missing.empty() ? "" : "incomplete: " + missing;
    }
    mv.dimension_status[std::string(Key(Dimension::kAccuracy))] = status({{clean, "clean"}});
    mv.dimension_status[std::string(Key(Dimension::kAdvRobustness))] =
        status({{clean, "clean"}, {fgsm, "fgsm"}, {pgd, "pgd"}});
    mv.dimension_status[std::string(Key(Dimension::kCRobustness))] =
        status({{clean, "clean"}, {corruption, "corruption"}});
    mv.dimension_status[std::string(Key(Dimension::kOodRobustness))] = ood_status;
    mv.dimension_status[std::string(Key(Dimension::kCalibrationError))] = status({{clean, "clean"}});
    mv.dimension_status[std::string(Key(Dimension::kClassBalance))] =
        clean ? status({{class_coverage, "class coverage"}}) : status({{clean, "clean"}});
    mv.dimension_status[std::string(Key(Dimension::kObjectFocus))] =
        status({{mixed_same, "mixed-same"}, {mixed_rand, "mixed-rand"}});
    mv.dimension_status[std::string(Key(Dimension::kShapeBias))] = status({{cue, "cue-conflict"}});
    mv.dimension_status[std::string(Key(Dimension::kParams))] = status({{mv.registered, "registry"}});
    report.models.push_back(std::move(mv));
  }
  for (const auto& card : registry.cards()) {
    if (key_counts.count(card.model_id) == 0) report.models_without_sets.push_back(card.model_id);
  }
  return report;
}

}  // namespace quba
