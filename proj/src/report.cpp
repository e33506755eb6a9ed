#include "quba/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace quba {

using ojson = nlohmann::ordered_json;

namespace {

ojson ProfileJson(const DimensionProfile& p) {
  ojson j;
  j["model_id"] = p.model_id();
  for (Dimension d : kAllDimensions) {
    if (p[d]) {
      j[std::string(Key(d))] = *p[d];
    } else {
      j[std::string(Key(d))] = nullptr;
    }
  }
  return j;
}

ojson CardJson(const ModelCard& card) { return ojson::parse(SerializeModelCard(card)); }

ojson MomentsJson(const DimensionMoments& m) {
  ojson arr = ojson::array();
  for (Dimension d : kAllDimensions) {
    ojson j;
    j["dimension"] = Key(d);
    j["mean"] = m.Mean(d);
    j["std"] = m.Std(d);
    j["orientation"] = LowerIsBetter(d) ? "lower-better" : "higher-better";
    arr.push_back(std::move(j));
  }
  return arr;
}

ojson WeightsJson(const WeightConfig& w) {
  ojson j;
  for (Dimension d : kAllDimensions) j[std::string(Key(d))] = w[d];
  return j;
}

ojson RankingJson(const Ranking& ranking) {
  ojson arr = ojson::array();
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    ojson j;
    j["rank"] = i + 1;
    j["model_id"] = ranking[i].model_id;
    j["quba"] = ranking[i].score;
    arr.push_back(std::move(j));
  }
  return arr;
}

ojson CorrelationJson(const CorrelationMatrix& m) {
  ojson arr = ojson::array();
  for (Dimension a : kAllDimensions) {
    for (Dimension b : kAllDimensions) {
      ojson j;
      j["a"] = Key(a);
      j["b"] = Key(b);
      j["rho"] = m.At(a, b).rho;
      j["p"] = m.At(a, b).p;
      j["significant"] = m.significant[Index(a)][Index(b)];
      arr.push_back(std::move(j));
    }
  }
  return arr;
}

ojson ComparisonJson(const ComparisonTable& t) {
  ojson arr = ojson::array();
  for (Dimension d : kAllDimensions) {
    ojson j;
    j["dimension"] = Key(d);
    j["test"] = ToString(t.test);
    ojson means;
    ojson ps;
    ojson stars;
    for (std::size_t g = 0; g < t.group_names.size(); ++g) {
      means[t.group_names[g]] = t.means[g][Index(d)];
      if (g == 0) continue;
      ps[t.group_names[g]] = t.tests[g][Index(d)].p;
      stars[t.group_names[g]] = ToString(t.stars[g][Index(d)]);
    }
    j["means"] = std::move(means);
    j["p"] = std::move(ps);
    j["stars"] = std::move(stars);
    j["best"] = t.group_names[t.best_group[Index(d)]];
    arr.push_back(std::move(j));
  }
  return arr;
}

ojson StabilityJson(const StabilityResult& r, const StabilityOptions& o) {
  ojson j;
  j["sample_size"] = o.sample_size;
  j["repetitions"] = o.repetitions;
  j["seed"] = o.seed;
  j["trim_fraction"] = o.trim_fraction;
  j["mean_correlation"] = r.mean_correlation;
  ojson pairs = ojson::array();
  for (const auto& p : r.pairs) {
    ojson e;
    e["rep_a"] = p.rep_a;
    e["rep_b"] = p.rep_b;
    e["rho"] = p.rho;
    pairs.push_back(std::move(e));
  }
  j["pairs"] = std::move(pairs);
  return j;
}

std::string JoinLines(const ojson& arr) {
  std::string out;
  for (const auto& j : arr) {
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string Fixed(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string SerializeProfiles(std::span<const DimensionProfile> profiles) {
  std::string out;
  for (const auto& p : profiles) {
    out += ProfileJson(p).dump();
    out += '\n';
  }
  return out;
}

std::vector<DimensionProfile> ParseProfiles(std::string_view text) {
  std::vector<DimensionProfile> out;
  std::set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "profiles line " + std::to_string(line_no) + ": ";
    const ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("model_id") || !j["model_id"].is_string()) {
      throw Error(ErrorCode::kParse, where + "expected an object with string 'model_id'");
    }
    DimensionProfile p(j["model_id"].get<std::string>());
    if (!ids.insert(p.model_id()).second) throw Error(ErrorCode::kDuplicate, where + "duplicate model_id");
    for (Dimension d : kAllDimensions) {
      const std::string key(Key(d));
      if (!j.contains(key) || j[key].is_null()) continue;
      if (!j[key].is_number()) throw Error(ErrorCode::kParse, where + "'" + key + "' must be a number or null");
      p[d] = j[key].get<double>();
    }
    try {
      p.CheckRanges();
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<DimensionProfile> LoadProfilesFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return ParseProfiles(os.str());
}

std::string SerializeRanking(const Ranking& ranking) { return JoinLines(RankingJson(ranking)); }

Ranking ParseRanking(std::string_view text) {
  Ranking out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("model_id") || !j.contains("quba")) {
      throw Error(ErrorCode::kParse, "malformed ranking line");
    }
    out.push_back({j["model_id"].get<std::string>(), j["quba"].get<double>()});
  }
  return out;
}

std::string SerializeCorrelation(const CorrelationMatrix& matrix) { return JoinLines(CorrelationJson(matrix)); }
std::string SerializeComparison(const ComparisonTable& table) { return JoinLines(ComparisonJson(table)); }

std::string SerializeStability(const StabilityResult& result, const StabilityOptions& options) {
  return StabilityJson(result, options).dump() + "\n";
}

std::string SerializeValidation(const ValidationReport& report) {
  std::string out;
  for (const auto& m : report.models) {
    ojson j;
    j["model_id"] = m.model_id;
    j["registered"] = m.registered;
    j["missing_inputs"] = m.missing_inputs;
    j["findings"] = m.findings;
    ojson dims;
    for (Dimension d : kAllDimensions) {
      const std::string key(Key(d));
      const auto it = m.dimension_status.find(key);
      const std::string status = it == m.dimension_status.end() ? "" : it->second;
      dims[key] = status.empty() ? "ok" : status;
    }
    j["dimensions"] = std::move(dims);
    out += j.dump();
    out += '\n';
  }
  for (const auto& id : report.models_without_sets) {
    ojson j;
    j["model_id"] = id;
    j["registered"] = true;
    j["findings"] = ojson::array({"no evaluation sets"});
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string PrettyValidation(const ValidationReport& report) {
  std::ostringstream os;
  for (const auto& m : report.models) {
    os << m.model_id << (m.registered ? "" : " [unregistered]") << '\n';
    for (Dimension d : kAllDimensions) {
      const auto it = m.dimension_status.find(std::string(Key(d)));
      const std::string status = it == m.dimension_status.end() || it->second.empty() ? "ok" : it->second;
      os << "  " << std::left << std::setw(18) << Key(d) << status << '\n';
    }
    for (const auto& f : m.findings) os << "  ! " << f << '\n';
  }
  for (const auto& id : report.models_without_sets) os << id << ": no evaluation sets\n";
  return os.str();
}

std::string PrettyRanking(const Ranking& ranking) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    os << std::right << std::setw(5) << i + 1 << "  " << std::setw(8) << Fixed(ranking[i].score, 3) << "  "
       << ranking[i].model_id << '\n';
  }
  return os.str();
}

std::string PrettyCorrelation(const CorrelationMatrix& matrix) {
  std::ostringstream os;
  os << std::setw(18) << "";
  for (Dimension d : kAllDimensions) os << std::setw(9) << Key(d).substr(0, 8);
  os << '\n';
  for (Dimension a : kAllDimensions) {
    os << std::left << std::setw(18) << Key(a) << std::right;
    for (Dimension b : kAllDimensions) {
      const bool sig = matrix.significant[Index(a)][Index(b)];
      os << std::setw(8) << Fixed(matrix.At(a, b).rho, 2) << (sig ? '*' : ' ');
    }
    os << '\n';
  }
  os << "(* p < " << kSignificanceLevel << ", n = " << matrix.num_models << ")\n";
  return os.str();
}

std::string PrettyComparison(const ComparisonTable& table) {
  std::ostringstream os;
  os << "test: " << ToString(table.test) << '\n';
  os << std::left << std::setw(18) << "dimension";
  for (std::size_t g = 0; g < table.group_names.size(); ++g) {
    os << std::setw(18) << (table.group_names[g] + " (n=" + std::to_string(table.group_sizes[g]) + ")");
  }
  os << '\n';
  for (Dimension d : kAllDimensions) {
    os << std::setw(18) << Key(d);
    for (std::size_t g = 0; g < table.group_names.size(); ++g) {
      std::string cell = Fixed(table.means[g][Index(d)], d == Dimension::kCalibrationError ? 4 : 2);
      if (g > 0) cell += ToString(table.stars[g][Index(d)]);
      if (table.best_group[Index(d)] == g) cell = "[" + cell + "]";
      os << std::setw(18) << cell;
    }
    os << '\n';
  }
  os << "(*** p < 0.05, ** p < 0.1, * p < 0.2 versus " << table.group_names.front() << "; [best])\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Filters

namespace {

std::string TrimCopy(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double ParseNumber(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse, "invalid number '" + s + "' in filter");
  }
  return v;
}

}  // namespace

ModelFilter ModelFilter::Parse(std::string_view expression) {
  ModelFilter f;
  f.expression_ = std::string(expression);
  std::size_t pos = 0;
  while (pos <= expression.size()) {
    const auto comma = expression.find(',', pos);
    const std::string term =
        TrimCopy(expression.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    pos = comma == std::string_view::npos ? expression.size() + 1 : comma + 1;
    if (term.empty()) {
      if (expression.empty()) break;
      throw Error(ErrorCode::kParse, "empty term in filter '" + f.expression_ + "'");
    }
    if (term.rfind("params", 0) == 0 && term.size() > 7 && (term[6] == '<' || term[6] == '>')) {
      const double bound = ParseNumber(TrimCopy(std::string_view(term).substr(7)));
      if (term[6] == '<') {
        f.terms_.emplace_back([bound](const ModelCard& c) { return c.params_millions < bound; });
      } else {
        f.terms_.emplace_back([bound](const ModelCard& c) { return c.params_millions > bound; });
      }
      continue;
    }
    const auto colon = term.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kParse, "filter term '" + term + "' lacks ':'");
    const std::string tag = TrimCopy(std::string_view(term).substr(0, colon));
    const std::string value = TrimCopy(std::string_view(term).substr(colon + 1));
    if (tag == "architecture_family" || tag == "arch") {
      const ArchitectureFamily a = ParseArchitectureFamily(value);
      f.terms_.emplace_back([a](const ModelCard& c) { return c.architecture_family == a; });
    } else if (tag == "paradigm") {
      const Paradigm p = ParseParadigm(value);
      f.terms_.emplace_back([p](const ModelCard& c) { return c.paradigm == p; });
    } else if (tag == "train_dataset" || tag == "train") {
      f.terms_.emplace_back([value](const ModelCard& c) { return c.train_dataset == value; });
    } else if (tag == "model_id") {
      f.terms_.emplace_back([value](const ModelCard& c) { return c.model_id == value; });
    } else {
      throw Error(ErrorCode::kUnknownTag, "unknown filter tag '" + tag + "'");
    }
  }
  return f;
}

bool ModelFilter::Matches(const ModelCard& card) const {
  return std::all_of(terms_.begin(), terms_.end(), [&](const auto& t) { return t(card); });
}

std::pair<std::string, ModelFilter> ParseGroupSpec(std::string_view spec) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::kParse, "group spec '" + std::string(spec) + "' must be name=filter");
  }
  return {TrimCopy(spec.substr(0, eq)), ModelFilter::Parse(spec.substr(eq + 1))};
}

ProfileGroup SelectGroup(const std::string& name, const ModelFilter& filter, const ModelRegistry& registry,
                         std::span<const DimensionProfile> profiles) {
  std::map<std::string_view, const DimensionProfile*> by_id;
  for (const auto& p : profiles) by_id.emplace(p.model_id(), &p);
  ProfileGroup g;
  g.name = name;
  for (const auto& card : registry.cards()) {
    if (!filter.Matches(card)) continue;
    auto it = by_id.find(card.model_id);
    if (it != by_id.end()) g.members.push_back(*it->second);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Pipeline

void ParallelFor(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += jobs) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  // Lowest index first so the reported error does not depend on scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<EvaluationSet> LoadLogDirectory(const std::string& dir, unsigned jobs) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::kIo, "log directory '" + dir + "' not found");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    auto ends_with = [&](std::string_view suffix) {
      return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".jsonl") || ends_with(".jsonl.gz") || ends_with(".log") || ends_with(".log.gz")) {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<std::optional<EvaluationSet>> loaded(paths.size());
  ParallelFor(paths.size(), jobs, [&](std::size_t i) { loaded[i] = LoadPredictionLog(paths[i]); });
  std::vector<EvaluationSet> sets;
  sets.reserve(loaded.size());
  for (auto& s : loaded) sets.push_back(std::move(*s));
  return sets;
}

std::vector<DimensionProfile> ScoreBundles(const std::vector<EvaluationSet>& sets, const ModelRegistry& registry,
                                           unsigned jobs) {
  const auto bundles = GroupByModel(sets);
  std::vector<const ModelBundle*> todo;
  for (const auto& [id, b] : bundles) {
    if (registry.Contains(id)) todo.push_back(&b);
  }
  std::vector<DimensionProfile> profiles(todo.size());
  ParallelFor(todo.size(), jobs, [&](std::size_t i) {
    profiles[i] = BuildDimensionProfile(*todo[i], registry.At(todo[i]->model_id));
  });
  return profiles;
}

void CheckConsistency(const ReportBundle& bundle) {
  bundle.moments.Validate();
  std::set<std::string> profiled;
  for (const auto& p : bundle.profiles) profiled.insert(p.model_id());
  std::set<std::string> ranked;
  for (const auto& e : bundle.ranking) {
    if (profiled.count(e.model_id) == 0) {
      throw Error(ErrorCode::kInvalidArgument, "ranked model '" + e.model_id + "' has no profile");
    }
    ranked.insert(e.model_id);
  }
  for (const auto& p : bundle.profiles) {
    if (p.Complete() && ranked.count(p.model_id()) == 0) {
      throw Error(ErrorCode::kInvalidArgument, "complete profile '" + p.model_id() + "' missing from ranking");
    }
  }
}

std::string SerializeReportBundle(const ReportBundle& bundle) {
  CheckConsistency(bundle);
  ojson j;
  j["schema_version"] = kBundleSchemaVersion;
  j["tool_version"] = kToolVersion;
  ojson registry = ojson::array();
  for (const auto& c : bundle.registry.cards()) registry.push_back(CardJson(c));
  j["registry"] = std::move(registry);
  ojson profiles = ojson::array();
  for (const auto& p : bundle.profiles) profiles.push_back(ProfileJson(p));
  j["profiles"] = std::move(profiles);
  j["moments"] = MomentsJson(bundle.moments);
  j["weights"] = WeightsJson(bundle.weights);
  j["ranking"] = RankingJson(bundle.ranking);
  ojson standardized = ojson::array();
  for (const auto& p : bundle.profiles) {
    if (!p.Complete()) continue;
    const StandardizedProfile z = Standardize(p, bundle.moments);
    ojson e;
    e["model_id"] = z.model_id;
    for (Dimension d : kAllDimensions) e[std::string(Key(d))] = z[d];
    standardized.push_back(std::move(e));
  }
  j["standardized"] = std::move(standardized);
  j["correlation"] = bundle.correlation ? CorrelationJson(*bundle.correlation) : ojson(nullptr);
  ojson comparisons = ojson::array();
  for (const auto& t : bundle.comparisons) {
    ojson c;
    c["groups"] = t.group_names;
    c["rows"] = ComparisonJson(t);
    comparisons.push_back(std::move(c));
  }
  j["comparisons"] = std::move(comparisons);
  j["stability"] = bundle.stability ? StabilityJson(bundle.stability->first, bundle.stability->second)
                                    : ojson(nullptr);
  return j.dump(1) + "\n";
}

}  // namespace quba
