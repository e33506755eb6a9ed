#include "quba/aggregate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace quba {

using ojson = nlohmann::ordered_json;

std::size_t TrimCount(std::size_t n, double trim_fraction) {
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "trim fraction must be in [0, 0.5)");
  }
  // The epsilon absorbs representation error in products like 0.1 * 30.
  return static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(n) + 1e-9));
}

Moments TrimmedMoments(std::vector<double> values, double trim_fraction, StdEstimator estimator) {
  const std::size_t k = TrimCount(values.size(), trim_fraction);
  if (values.size() < 2 * k + 3) {
    throw Error(ErrorCode::kInvalidArgument, "trimmed moments need at least 3 survivors, have " +
                                                 std::to_string(values.size() - std::min(values.size(), 2 * k)));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "trimmed moments of non-finite value");
  }
  std::sort(values.begin(), values.end());
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(k);
  const auto last = values.end() - static_cast<std::ptrdiff_t>(k);
  // Survivors are sorted, so they are all equal iff the extremes are; checking
  // this directly avoids rounding residue in the computed variance.
  if (*first == *(last - 1)) throw Error(ErrorCode::kZeroVariance, "zero variance among trimmed survivors");
  const double n = static_cast<double>(last - first);
  double sum = 0.0;
  for (auto it = first; it != last; ++it) sum += *it;
  const double mean = sum / n;
  double ss = 0.0;
  for (auto it = first; it != last; ++it) ss += (*it - mean) * (*it - mean);
  const double denom = estimator == StdEstimator::kSample ? n - 1.0 : n;
  const double sd = std::sqrt(ss / denom);
  if (!(sd > 0.0)) throw Error(ErrorCode::kZeroVariance, "zero variance among trimmed survivors");
  return {mean, sd};
}

void DimensionMoments::Validate() const {
  for (Dimension d : kAllDimensions) {
    if (!std::isfinite(Mean(d)) || !std::isfinite(Std(d)) || !(Std(d) > 0.0)) {
      throw Error(ErrorCode::kRange, "moments for '" + std::string(Key(d)) + "' need finite mean and std > 0");
    }
  }
}

DimensionMoments FitMoments(std::span<const DimensionProfile> profiles, double trim_fraction,
                            StdEstimator estimator) {
  DimensionMoments m;
  for (Dimension d : kAllDimensions) {
    std::vector<double> values;
    values.reserve(profiles.size());
    for (const auto& p : profiles) values.push_back(p.Value(d));
    try {
      const Moments dm = TrimmedMoments(std::move(values), trim_fraction, estimator);
      m.mean[Index(d)] = dm.mean;
      m.std[Index(d)] = dm.std;
    } catch (const Error& e) {
      throw Error(e.code(), std::string(Key(d)) + ": " + e.what());
    }
  }
  return m;
}

DimensionMoments PublishedReferenceMoments() {
  DimensionMoments m;
  m.mean = {0.80, 0.19, 0.53, 0.57, 0.0045, 0.78, 0.93, 0.31, 55.0};
  m.std = {0.03, 0.11, 0.23, 0.15, 0.0027, 0.02, 0.02, 0.08, 43.0};
  return m;
}

DimensionMoments ParseMoments(std::istream& in) {
  DimensionMoments m;
  std::array<bool, kNumDimensions> seen{};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "moments line " + std::to_string(line_no) + ": ";
    const ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kParse, where + "malformed object");
    if (!j.contains("dimension") || !j["dimension"].is_string() || !j.contains("mean") ||
        !j["mean"].is_number() || !j.contains("std") || !j["std"].is_number()) {
      throw Error(ErrorCode::kParse, where + "expected string 'dimension' and numeric 'mean', 'std'");
    }
    Dimension d{};
    if (!ParseDimension(j["dimension"].get<std::string>(), d)) {
      throw Error(ErrorCode::kUnknownTag, where + "unknown dimension '" + j["dimension"].get<std::string>() + "'");
    }
    if (seen[Index(d)]) throw Error(ErrorCode::kDuplicate, where + "duplicate dimension");
    seen[Index(d)] = true;
    m.mean[Index(d)] = j["mean"].get<double>();
    m.std[Index(d)] = j["std"].get<double>();
  }
  for (Dimension d : kAllDimensions) {
    if (!seen[Index(d)]) {
      throw Error(ErrorCode::kSchemaMismatch, "moments missing dimension '" + std::string(Key(d)) + "'");
    }
  }
  m.Validate();
  return m;
}

DimensionMoments LoadMomentsFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return ParseMoments(in);
}

std::string SerializeMoments(const DimensionMoments& moments) {
  std::string out;
  for (Dimension d : kAllDimensions) {
    ojson j;
    j["dimension"] = Key(d);
    j["mean"] = moments.Mean(d);
    j["std"] = moments.Std(d);
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weights

WeightConfig WeightConfig::Default() {
  WeightConfig w;
  w.w_.fill(1.0);
  w.Set(Dimension::kAdvRobustness, 1.0 / 3.0);
  w.Set(Dimension::kCRobustness, 1.0 / 3.0);
  w.Set(Dimension::kOodRobustness, 1.0 / 3.0);
  w.Set(Dimension::kObjectFocus, 0.5);
  w.Set(Dimension::kShapeBias, 0.5);
  return w;
}

WeightConfig WeightConfig::Only(Dimension d) {
  WeightConfig w;
  w.Set(d, 1.0);
  return w;
}

void WeightConfig::Set(Dimension d, double w) { w_[Index(d)] = w; }

double WeightConfig::Sum() const {
  double s = 0.0;
  for (double w : w_) s += w;
  return s;
}

WeightConfig WeightConfig::Scaled(double factor) const {
  WeightConfig out = *this;
  for (double& w : out.w_) w *= factor;
  return out;
}

void WeightConfig::Validate() const {
  for (Dimension d : kAllDimensions) {
    const double w = (*this)[d];
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "weight '" + std::string(Key(d)) + "' must be finite and >= 0");
    }
  }
  if (!(Sum() > 0.0)) throw Error(ErrorCode::kInvalidArgument, "weights must not all be zero");
}

namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double ParseDouble(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(ErrorCode::kParse, where + "invalid number '" + s + "'");
  return v;
}

}  // namespace

WeightConfig ParseWeights(std::istream& in) {
  WeightConfig w = WeightConfig::Default();
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = "weights line " + std::to_string(line_no) + ": ";
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = Trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kParse, where + "expected 'key = value'");
    const std::string key = Trim(std::string_view(t).substr(0, eq));
    const std::string value = Trim(std::string_view(t).substr(eq + 1));
    Dimension d{};
    if (!ParseDimension(key, d)) throw Error(ErrorCode::kUnknownTag, where + "unknown weight key '" + key + "'");
    if (!seen.insert(key).second) throw Error(ErrorCode::kDuplicate, where + "duplicate key '" + key + "'");
    double v = 0.0;
    if (auto slash = value.find('/'); slash != std::string::npos) {
      const double num = ParseDouble(Trim(std::string_view(value).substr(0, slash)), where);
      const double den = ParseDouble(Trim(std::string_view(value).substr(slash + 1)), where);
      if (den == 0.0) throw Error(ErrorCode::kParse, where + "zero denominator");
      v = num / den;
    } else {
      v = ParseDouble(value, where);
    }
    w.Set(d, v);
  }
  w.Validate();
  return w;
}

WeightConfig ParseWeights(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ParseWeights(in);
}

WeightConfig LoadWeightsFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return ParseWeights(in);
}

std::string SerializeWeights(const WeightConfig& weights) {
  std::ostringstream os;
  os.precision(17);
  for (Dimension d : kAllDimensions) os << Key(d) << " = " << weights[d] << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Scoring

StandardizedProfile Standardize(const DimensionProfile& profile, const DimensionMoments& moments) {
  StandardizedProfile z;
  z.model_id = profile.model_id();
  for (Dimension d : kAllDimensions) {
    const double s = profile.Value(d);
    const double sd = moments.Std(d);
    if (!(sd > 0.0)) throw Error(ErrorCode::kZeroVariance, "std for '" + std::string(Key(d)) + "' is not positive");
    const double standardized = (s - moments.Mean(d)) / sd;
    z.z[Index(d)] = LowerIsBetter(d) ? -standardized : standardized;
  }
  return z;
}

double QubaScore(const StandardizedProfile& z, const WeightConfig& weights) {
  weights.Validate();
  double num = 0.0;
  for (Dimension d : kAllDimensions) num += weights[d] * z[d];
  return num / weights.Sum();
}

Ranking RankModels(std::span<const DimensionProfile> profiles, const DimensionMoments& moments,
                   const WeightConfig& weights) {
  weights.Validate();
  Ranking ranking;
  ranking.reserve(profiles.size());
  std::set<std::string_view> ids;
  for (const auto& p : profiles) {
    if (!ids.insert(p.model_id()).second) {
      throw Error(ErrorCode::kDuplicate, "duplicate model_id '" + p.model_id() + "' in ranking input");
    }
    ranking.push_back({p.model_id(), QubaScore(Standardize(p, moments), weights)});
  }
  std::sort(ranking.begin(), ranking.end(), [](const RankEntry& a, const RankEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.model_id < b.model_id;
  });
  return ranking;
}

StandardizedProfile GroupProfile(std::span<const DimensionProfile> profiles, const DimensionMoments& moments,
                                 std::string group_name) {
  if (profiles.empty()) throw Error(ErrorCode::kInvalidArgument, "group profile of an empty group");
  std::vector<StandardizedProfile> zs;
  zs.reserve(profiles.size());
  for (const auto& p : profiles) zs.push_back(Standardize(p, moments));
  std::sort(zs.begin(), zs.end(), [](const auto& a, const auto& b) { return a.model_id < b.model_id; });
  StandardizedProfile out;
  out.model_id = std::move(group_name);
  for (Dimension d : kAllDimensions) {
    double sum = 0.0;
    for (const auto& z : zs) sum += z[d];
    out.z[Index(d)] = sum / static_cast<double>(zs.size());
  }
  return out;
}

}  // namespace quba
