#include <zlib.h>

#include <algorithm>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "quba/records.hpp"
#include "quba/stats.hpp"
#include "quba/synthetic.hpp"

using namespace quba;

namespace {

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected quba::Error");
  return ErrorCode::kIo;
}

std::string MessageOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

const char* kManifest = R"({"schema_version":1,"model_id":"m","family":"clean","num_classes":2})";

}  // namespace

TEST_CASE("minimal clean log parses") {
  const std::string log = std::string(kManifest) + "\n" +
                          R"({"image_id":"a","true_label":0,"pred_label":0,"confidence":0.9,"true_prob":0.9})" "\n"
                          R"({"image_id":"b","true_label":1,"pred_label":0,"confidence":0.6,"true_prob":0.4})" "\n";
  const EvaluationSet s = ParsePredictionLog(log);
  CHECK(s.size() == 2);
  CHECK(s.model_id() == "m");
  CHECK(s.family() == Family::kClean);
  CHECK(s.records()[1].image_id == "b");
  CHECK(*s.records()[1].true_prob == doctest::Approx(0.4));
}

TEST_CASE("record errors name the field and line") {
  const std::string bad_conf = std::string(kManifest) + "\n" +
                               R"({"image_id":"a","true_label":0,"pred_label":0,"confidence":1.3,"true_prob":0.9})";
  CHECK(CodeOf([&] { ParsePredictionLog(bad_conf); }) == ErrorCode::kRange);
  const std::string msg = MessageOf([&] { ParsePredictionLog(bad_conf); });
  CHECK(msg.find("confidence") != std::string::npos);
  CHECK(msg.find("line 2") != std::string::npos);

  const std::string shape_in_clean =
      std::string(kManifest) + "\n" +
      R"({"image_id":"a","true_label":0,"shape_label":1,"pred_label":0,"confidence":0.9,"true_prob":0.9})";
  CHECK(CodeOf([&] { ParsePredictionLog(shape_in_clean); }) == ErrorCode::kSchemaMismatch);

  const std::string dup = std::string(kManifest) + "\n" +
                          R"({"image_id":"a","true_label":0,"pred_label":0,"confidence":0.9,"true_prob":0.9})" "\n"
                          R"({"image_id":"a","true_label":1,"pred_label":1,"confidence":0.9,"true_prob":0.9})";
  CHECK(CodeOf([&] { ParsePredictionLog(dup); }) == ErrorCode::kDuplicate);
  CHECK(MessageOf([&] { ParsePredictionLog(dup); }).find("line 3") != std::string::npos);

  const std::string out_of_range = std::string(kManifest) + "\n" +
                                   R"({"image_id":"a","true_label":2,"pred_label":0,"confidence":0.9,"true_prob":0.1})";
  CHECK(CodeOf([&] { ParsePredictionLog(out_of_range); }) == ErrorCode::kLabelRange);

  const std::string dominance = std::string(kManifest) + "\n" +
                                R"({"image_id":"a","true_label":1,"pred_label":0,"confidence":0.5,"true_prob":0.6})";
  CHECK(CodeOf([&] { ParsePredictionLog(dominance); }) == ErrorCode::kRange);

  const std::string malformed = std::string(kManifest) + "\n{\"image_id\": oops}\n";
  CHECK(CodeOf([&] { ParsePredictionLog(malformed); }) == ErrorCode::kParse);
  CHECK(MessageOf([&] { ParsePredictionLog(malformed); }).find("line 2") != std::string::npos);

  const std::string float_label = std::string(kManifest) + "\n" +
                                  R"({"image_id":"a","true_label":0.5,"pred_label":0,"confidence":0.9,"true_prob":0.1})";
  CHECK(CodeOf([&] { ParsePredictionLog(float_label); }) == ErrorCode::kParse);
}

TEST_CASE("manifest errors") {
  const std::string rec = R"({"image_id":"a","true_label":0,"pred_label":0,"confidence":0.9,"true_prob":0.9})";
  CHECK(CodeOf([] { ParsePredictionLog(std::string_view("")); }) == ErrorCode::kParse);
  CHECK(CodeOf([&] { ParsePredictionLog(std::string(kManifest) + "\n"); }) == ErrorCode::kRange);
  CHECK(CodeOf([&] {
          ParsePredictionLog(R"({"schema_version":2,"model_id":"m","family":"clean","num_classes":2})" "\n" + rec);
        }) == ErrorCode::kSchemaMismatch);
  CHECK(CodeOf([&] {
          ParsePredictionLog(R"({"schema_version":1,"model_id":"m","family":"weird","num_classes":2})" "\n" + rec);
        }) == ErrorCode::kUnknownTag);
  CHECK(CodeOf([&] {
          ParsePredictionLog(
              R"({"schema_version":1,"model_id":"m","family":"corruption","corruption_name":"fog","severity":6,"num_classes":2})" "\n" +
              rec);
        }) == ErrorCode::kRange);
  CHECK(CodeOf([&] {
          ParsePredictionLog(R"({"schema_version":1,"model_id":"m","family":"clean","num_classes":0})" "\n" + rec);
        }) == ErrorCode::kRange);
}

// Every subset of the four conditional manifest keys, for every family: only
// the subset the family requires is accepted.
TEST_CASE("manifest field-presence matrix is exhaustively enforced") {
  const char* keys[] = {"attack_name", "corruption_name", "severity", "ood_name"};
  const char* values[] = {R"("pgd")", R"("fog")", "3", R"("edge")"};
  int accepted = 0;
  for (Family f : kAllFamilies) {
    unsigned required = 0;
    if (f == Family::kAttack) required = 0b0001;
    if (f == Family::kCorruption) required = 0b0110;
    if (f == Family::kOod) required = 0b1000;
    const std::string record =
        HasTrueLabel(f) ? R"({"image_id":"a","true_label":0,"pred_label":0,"confidence":0.9,"true_prob":0.9})"
                        : R"({"image_id":"a","shape_label":0,"texture_label":1,"pred_label":0,"confidence":0.9})";
    for (unsigned mask = 0; mask < 16; ++mask) {
      std::string manifest = R"({"schema_version":1,"model_id":"m","family":")" + std::string(ToString(f)) +
                             R"(","num_classes":4)";
      for (unsigned k = 0; k < 4; ++k) {
        if (mask & (1u << k)) manifest += std::string(",\"") + keys[k] + "\":" + values[k];
      }
      manifest += "}";
      const std::string log = manifest + "\n" + record + "\n";
      CAPTURE(log);
      if (mask == required) {
        CHECK_NOTHROW(ParsePredictionLog(log));
        ++accepted;
      } else {
        CHECK(CodeOf([&] { ParsePredictionLog(log); }) == ErrorCode::kSchemaMismatch);
      }
    }
  }
  CHECK(accepted == 7);
}

TEST_CASE("record field-presence matrix is exhaustively enforced") {
  const char* keys[] = {"true_label", "true_prob", "shape_label", "texture_label"};
  const char* values[] = {"0", "0.5", "0", "1"};
  for (Family f : kAllFamilies) {
    DatasetKind kind = DatasetKind::Of(f);
    if (f == Family::kAttack) kind = DatasetKind::Attack(AttackName::kFgsm);
    if (f == Family::kCorruption) kind = DatasetKind::Corruption("fog", 2);
    if (f == Family::kOod) kind = DatasetKind::Ood(OodName::kStylized);
    // Build the manifest via the serializer of a valid set.
    PredictionRecord seed_record;
    seed_record.image_id = "seed";
    seed_record.pred_label = 0;
    seed_record.confidence = 0.9;
    if (HasTrueLabel(f)) {
      seed_record.true_label = 0;
      seed_record.true_prob = 0.9;
    } else {
      seed_record.shape_label = 0;
      seed_record.texture_label = 1;
    }
    const std::string valid = SerializePredictionLog(EvaluationSet::Create("m", kind, 4, {seed_record}));
    const std::string manifest = valid.substr(0, valid.find('\n'));
    const unsigned required = HasTrueLabel(f) ? 0b0011 : 0b1100;
    for (unsigned mask = 0; mask < 16; ++mask) {
      std::string rec = R"({"image_id":"x")";
      for (unsigned k = 0; k < 4; ++k) {
        if (mask & (1u << k)) rec += std::string(",\"") + keys[k] + "\":" + values[k];
      }
      rec += R"(,"pred_label":0,"confidence":0.9})";
      const std::string log = manifest + "\n" + rec + "\n";
      CAPTURE(log);
      if (mask == required) {
        CHECK_NOTHROW(ParsePredictionLog(log));
      } else {
        CHECK(CodeOf([&] { ParsePredictionLog(log); }) == ErrorCode::kSchemaMismatch);
      }
    }
  }
}

TEST_CASE("cue-conflict records need distinct shape and texture labels") {
  const std::string log =
      R"({"schema_version":1,"model_id":"m","family":"cue-conflict","num_classes":16})" "\n"
      R"({"image_id":"a","shape_label":3,"texture_label":3,"pred_label":3,"confidence":0.9})";
  CHECK(CodeOf([&] { ParsePredictionLog(log); }) == ErrorCode::kSchemaMismatch);
}

TEST_CASE("serialize then parse round-trips random logs byte-identically") {
  SplitMix64 rng(20240501);
  for (int i = 0; i < 300; ++i) {
    const Family f = kAllFamilies[rng.Below(std::size(kAllFamilies))];
    const EvaluationSet s = synthetic::RandomEvaluationSet(rng, f, 60, 12);
    const std::string text = SerializePredictionLog(s);
    const EvaluationSet parsed = ParsePredictionLog(text);
    CHECK(parsed == s);
    CHECK(SerializePredictionLog(parsed) == text);
  }
}

TEST_CASE("attack parameters survive in the manifest") {
  DatasetKind k = DatasetKind::Attack(AttackName::kPgd);
  k.attack_params.epsilon = 8.0 / 255.0;
  k.attack_params.iterations = 10;
  k.attack_params.step_size = 2.0 / 255.0;
  PredictionRecord r{"a", 0, std::nullopt, std::nullopt, 1, 0.7, 0.2};
  const auto s = EvaluationSet::Create("m", k, 3, {r});
  const auto back = ParsePredictionLog(SerializePredictionLog(s));
  CHECK(back.kind().attack_params.epsilon == k.attack_params.epsilon);
  CHECK(back.kind().attack_params.iterations == 10);
  DatasetKind bad = DatasetKind::Clean();
  bad.attack_params.epsilon = 0.1;
  CHECK(CodeOf([&] { bad.Validate(); }) == ErrorCode::kSchemaMismatch);
}

TEST_CASE("gzip logs load transparently") {
  SplitMix64 rng(5);
  const EvaluationSet s = synthetic::RandomEvaluationSet(rng, Family::kClean);
  const std::string text = SerializePredictionLog(s);
  const auto path = (std::filesystem::temp_directory_path() / "quba_test_log.jsonl.gz").string();
  gzFile f = gzopen(path.c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
  gzclose(f);
  CHECK(LoadPredictionLog(path) == s);
  std::filesystem::remove(path);
  CHECK(CodeOf([&] { LoadPredictionLog(path); }) == ErrorCode::kIo);
}

// ---------------------------------------------------------------------------

TEST_CASE("registry loading") {
  const std::string three =
      R"({"model_id":"a","architecture_family":"cnn","train_dataset":"in1k","paradigm":"supervised","params_millions":10})" "\n"
      R"({"model_id":"b","architecture_family":"transformer","train_dataset":"in21k","paradigm":"self-sup-e2e","params_millions":86})" "\n"
      R"({"model_id":"c","architecture_family":"vil","train_dataset":"large-scale","paradigm":"vil","params_millions":427})" "\n";
  const ModelRegistry reg = LoadModelRegistry(three);
  CHECK(reg.size() == 3);
  CHECK(reg.cards()[1].model_id == "b");
  CHECK(reg.At("c").paradigm == Paradigm::kVil);
  CHECK(reg.Find("zzz") == nullptr);

  const std::string dup =
      R"({"model_id":"a","architecture_family":"cnn","train_dataset":"in1k","paradigm":"supervised","params_millions":10})" "\n"
      R"({"model_id":"a","architecture_family":"cnn","train_dataset":"in1k","paradigm":"supervised","params_millions":11})";
  CHECK(CodeOf([&] { LoadModelRegistry(dup); }) == ErrorCode::kDuplicate);
  CHECK(CodeOf([] {
          LoadModelRegistry(std::string_view(
              R"({"model_id":"a","architecture_family":"rnn","train_dataset":"in1k","paradigm":"supervised","params_millions":1})"));
        }) == ErrorCode::kUnknownTag);
  CHECK(CodeOf([] {
          LoadModelRegistry(std::string_view(
              R"({"model_id":"a","architecture_family":"cnn","train_dataset":"in1k","paradigm":"magic","params_millions":1})"));
        }) == ErrorCode::kUnknownTag);
  CHECK(CodeOf([] {
          LoadModelRegistry(std::string_view(
              R"({"model_id":"a","architecture_family":"cnn","train_dataset":"in1k","paradigm":"supervised","params_millions":0})"));
        }) == ErrorCode::kRange);
}

TEST_CASE("ResNet50 card round-trips") {
  ModelCard card{"resnet50", ArchitectureFamily::kCnn, "in1k", Paradigm::kSupervised, 25.0};
  const ModelRegistry reg = LoadModelRegistry(SerializeModelCard(card));
  CHECK(reg.At("resnet50") == card);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<EvaluationSet> FullBundle(const std::string& id, std::uint64_t seed) {
  return synthetic::GenerateModelLogs(id, synthetic::LogTargets{}, 40, 4, seed);
}

ModelRegistry RegistryFor(std::initializer_list<std::string> ids) {
  ModelRegistry reg;
  for (const auto& id : ids) reg.Add({id, ArchitectureFamily::kCnn, "in1k", Paradigm::kSupervised, 25.0});
  return reg;
}

std::string InputTag(const EvaluationSet& s) {
  const DatasetKind& k = s.kind();
  switch (k.family) {
    case Family::kClean: return "clean";
    case Family::kAttack: return std::string(ToString(*k.attack_name));
    case Family::kCorruption: return "corruption";
    case Family::kOod: return "ood:" + std::string(ToString(*k.ood_name));
    default: return std::string(ToString(k.family));
  }
}

}  // namespace

TEST_CASE("full bundle validates completely") {
  const auto sets = FullBundle("m", 1);
  const auto report = ValidateBundle(sets, RegistryFor({"m"}));
  REQUIRE(report.models.size() == 1);
  CHECK(report.models[0].missing_inputs.empty());
  CHECK(report.models[0].findings.empty());
  for (const auto& [dim, status] : report.models[0].dimension_status) CHECK(status.empty());
  CHECK(report.AllComplete());
}

TEST_CASE("missing pgd flags adversarial robustness") {
  auto sets = FullBundle("m", 2);
  std::erase_if(sets, [](const EvaluationSet& s) { return s.kind().attack_name == AttackName::kPgd; });
  const auto report = ValidateBundle(sets, RegistryFor({"m"}));
  CHECK(report.models[0].dimension_status.at("adv_robustness") == "incomplete: pgd");
  CHECK(report.models[0].missing_inputs == std::vector<std::string>{"pgd"});
}

TEST_CASE("single-omission bundles raise exactly one flag each") {
  const auto full = FullBundle("m", 3);
  // Corruption sets are a group: omit them together.
  std::vector<std::string> tags;
  for (const auto& s : full) {
    const std::string t = InputTag(s);
    if (std::find(tags.begin(), tags.end(), t) == tags.end()) tags.push_back(t);
  }
  CHECK(tags.size() == 12);
  for (const auto& tag : tags) {
    std::vector<EvaluationSet> sets;
    for (const auto& s : full) {
      if (InputTag(s) != tag) sets.push_back(s);
    }
    const auto report = ValidateBundle(sets, RegistryFor({"m"}));
    CAPTURE(tag);
    REQUIRE(report.models.size() == 1);
    CHECK(report.models[0].missing_inputs == std::vector<std::string>{tag});
    CHECK(report.models[0].findings.empty());
  }
  const auto unregistered = ValidateBundle(full, RegistryFor({"other"}));
  REQUIRE(unregistered.models.size() == 1);
  CHECK(unregistered.models[0].missing_inputs.empty());
  CHECK(unregistered.models[0].findings == std::vector<std::string>{"unregistered model"});
  CHECK(unregistered.models[0].dimension_status.at("params") == "incomplete: registry");
  CHECK(unregistered.models_without_sets == std::vector<std::string>{"other"});
}

TEST_CASE("validation is pure and reports duplicates") {
  auto sets = FullBundle("m", 4);
  auto more = FullBundle("n", 5);
  sets.insert(sets.end(), more.begin(), more.end());
  sets.push_back(sets.front());  // second clean set for "m"
  const auto reg = RegistryFor({"m", "n"});
  const auto before = sets;
  const auto r1 = ValidateBundle(sets, reg);
  const auto r2 = ValidateBundle(sets, reg);
  CHECK(r1 == r2);
  CHECK(sets == before);
  REQUIRE(r1.models.size() == 2);
  CHECK(r1.models[0].findings == std::vector<std::string>{"duplicate: clean (2 sets)"});
}

TEST_CASE("class coverage gaps mark class balance incomplete") {
  PredictionRecord r{"a", 0, std::nullopt, std::nullopt, 0, 0.9, 0.9};
  const auto clean = EvaluationSet::Create("m", DatasetKind::Clean(), 3, {r});
  const auto report = ValidateBundle({clean}, RegistryFor({"m"}));
  CHECK(report.models[0].dimension_status.at("class_balance") == "incomplete: class coverage");
  CHECK(report.models[0].dimension_status.at("accuracy").empty());
}
