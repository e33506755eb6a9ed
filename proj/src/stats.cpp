#include "quba/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace quba {

// ---------------------------------------------------------------------------
// Special functions

namespace {

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double BetaContinuedFraction(double x, double a, double b) {
  constexpr int kMaxIterations = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error(ErrorCode::kUndefined, "incomplete beta continued fraction did not converge");
}

}  // namespace

double RegularizedIncompleteBeta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::kInvalidArgument, "incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * BetaContinuedFraction(x, a, b) / a;
  return 1.0 - front * BetaContinuedFraction(1.0 - x, b, a) / b;
}

double StudentTTwoSidedP(double t, double dof) {
  if (!(dof > 0.0)) throw Error(ErrorCode::kInvalidArgument, "degrees of freedom must be positive");
  if (std::isnan(t)) throw Error(ErrorCode::kInvalidArgument, "t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  // x = dof / (dof + t^2); 1 - x = t^2 / (dof + t^2) computed without cancellation.
  const double x = dof / (dof + t2);
  const double a = 0.5 * dof;
  const double b = 0.5;
  if (x < (a + 1.0) / (a + b + 2.0)) return RegularizedIncompleteBeta(x, a, b);
  return 1.0 - RegularizedIncompleteBeta(t2 / (dof + t2), b, a);
}

double StudentTCdf(double t, double dof) {
  const double tail = 0.5 * StudentTTwoSidedP(t, dof);
  return t >= 0.0 ? 1.0 - tail : tail;
}

// ---------------------------------------------------------------------------
// Ranks and Spearman

std::vector<double> AverageRanks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 (0-based) share the average 1-based rank.
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

namespace {

double Pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::kZeroVariance, "rank correlation of a constant vector");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void CheckPair(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::kInvalidArgument, "spearman inputs differ in length");
  if (xs.size() < 3) throw Error(ErrorCode::kInvalidArgument, "spearman needs n >= 3");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::isnan(xs[i]) || std::isnan(ys[i])) throw Error(ErrorCode::kInvalidArgument, "spearman input is NaN");
  }
}

}  // namespace

Correlation Spearman(std::span<const double> xs, std::span<const double> ys) {
  CheckPair(xs, ys);
  const auto rx = AverageRanks(xs);
  const auto ry = AverageRanks(ys);
  Correlation c;
  c.rho = Pearson(rx, ry);
  if (std::abs(c.rho) >= 1.0) {
    c.p = 0.0;
    return c;
  }
  const double dof = static_cast<double>(xs.size()) - 2.0;
  const double t = c.rho * std::sqrt(dof / ((1.0 - c.rho) * (1.0 + c.rho)));
  c.p = StudentTTwoSidedP(t, dof);
  return c;
}

double SpearmanExactPValue(std::span<const double> xs, std::span<const double> ys) {
  CheckPair(xs, ys);
  if (xs.size() > 10) throw Error(ErrorCode::kInvalidArgument, "exact permutation p-value limited to n <= 10");
  const auto rx = AverageRanks(xs);
  const auto ry = AverageRanks(ys);
  const double observed = std::abs(Pearson(rx, ry));
  std::vector<std::size_t> perm(ry.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> permuted(ry.size());
  std::uint64_t total = 0;
  std::uint64_t extreme = 0;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) permuted[i] = ry[perm[i]];
    if (std::abs(Pearson(rx, permuted)) >= observed - 1e-12) ++extreme;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

CorrelationMatrix ComputeCorrelationMatrix(std::span<const DimensionProfile> profiles) {
  if (profiles.size() < 3) throw Error(ErrorCode::kInvalidArgument, "correlation matrix needs >= 3 profiles");
  std::array<std::vector<double>, kNumDimensions> columns;
  for (Dimension d : kAllDimensions) {
    columns[Index(d)].reserve(profiles.size());
    for (const auto& p : profiles) columns[Index(d)].push_back(p.Value(d));
  }
  CorrelationMatrix m;
  m.num_models = profiles.size();
  for (std::size_t i = 0; i < kNumDimensions; ++i) {
    m.cells[i][i] = {1.0, 0.0};
    m.significant[i][i] = true;
    for (std::size_t j = i + 1; j < kNumDimensions; ++j) {
      const Correlation c = Spearman(columns[i], columns[j]);
      m.cells[i][j] = c;
      m.cells[j][i] = c;
      m.significant[i][j] = m.significant[j][i] = c.p < kSignificanceLevel;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// t-tests and comparisons

Stars StarsForP(double p) {
  if (p < 0.05) return Stars::kThree;
  if (p < 0.1) return Stars::kTwo;
  if (p < 0.2) return Stars::kOne;
  return Stars::kNone;
}

std::string_view ToString(Stars s) {
  switch (s) {
    case Stars::kNone: return "";
    case Stars::kOne: return "*";
    case Stars::kTwo: return "**";
    case Stars::kThree: return "***";
  }
  return "";
}

std::string_view ToString(TTestKind k) { return k == TTestKind::kPaired ? "paired" : "welch"; }

namespace {

struct MeanVar {
  double mean;
  double var;  // sample variance
};

MeanVar SampleMeanVar(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, ss / (n - 1.0)};
}

TTestResult DegenerateOrT(double diff, double se, double dof) {
  TTestResult r;
  r.dof = dof;
  if (se == 0.0) {
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = diff / se;
  r.p = StudentTTwoSidedP(r.t, dof);
  return r;
}

}  // namespace

TTestResult PairedTTest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kInvalidArgument, "paired t-test needs equal group sizes");
  if (a.size() < 2) throw Error(ErrorCode::kInvalidArgument, "t-test needs groups of size >= 2");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = b[i] - a[i];
  const MeanVar mv = SampleMeanVar(diff);
  const double n = static_cast<double>(diff.size());
  // Differences identical up to rounding count as zero variance.
  const double var = mv.var <= 1e-24 * std::max(1.0, mv.mean * mv.mean) ? 0.0 : mv.var;
  return DegenerateOrT(mv.mean, std::sqrt(var / n), n - 1.0);
}

TTestResult WelchTTest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::kInvalidArgument, "t-test needs groups of size >= 2");
  const MeanVar ma = SampleMeanVar(a);
  const MeanVar mb = SampleMeanVar(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = ma.var / na;
  const double vb = mb.var / nb;
  const double se2 = va + vb;
  const double dof = se2 == 0.0 ? na + nb - 2.0 : se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return DegenerateOrT(mb.mean - ma.mean, std::sqrt(se2), dof);
}

ComparisonTable GroupCompare(std::span<const ProfileGroup> groups, bool paired) {
  if (groups.size() < 2 || groups.size() > 4) {
    throw Error(ErrorCode::kInvalidArgument, "group comparison needs 2 to 4 groups");
  }
  for (const auto& g : groups) {
    if (g.members.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument, "group '" + g.name + "' has fewer than 2 members");
    }
    if (paired && g.members.size() != groups.front().members.size()) {
      throw Error(ErrorCode::kInvalidArgument, "paired comparison needs equal group sizes");
    }
  }
  ComparisonTable table;
  table.test = paired ? TTestKind::kPaired : TTestKind::kWelch;
  std::vector<std::array<std::vector<double>, kNumDimensions>> columns(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    table.group_names.push_back(groups[g].name);
    table.group_sizes.push_back(groups[g].members.size());
    std::array<double, kNumDimensions> means{};
    for (Dimension d : kAllDimensions) {
      auto& col = columns[g][Index(d)];
      for (const auto& p : groups[g].members) col.push_back(p.Value(d));
      double sum = 0.0;
      for (double v : col) sum += v;
      means[Index(d)] = sum / static_cast<double>(col.size());
    }
    table.means.push_back(means);
  }
  table.tests.resize(groups.size());
  table.stars.resize(groups.size());
  table.stars[0].fill(Stars::kNone);
  for (std::size_t g = 1; g < groups.size(); ++g) {
    for (Dimension d : kAllDimensions) {
      const auto& a = columns[0][Index(d)];
      const auto& b = columns[g][Index(d)];
      const TTestResult r = paired ? PairedTTest(a, b) : WelchTTest(a, b);
      table.tests[g][Index(d)] = r;
      table.stars[g][Index(d)] = StarsForP(r.p);
    }
  }
  for (Dimension d : kAllDimensions) {
    std::size_t best = 0;
    for (std::size_t g = 1; g < groups.size(); ++g) {
      const double cur = table.means[g][Index(d)];
      const double top = table.means[best][Index(d)];
      if (LowerIsBetter(d) ? cur < top : cur > top) best = g;
    }
    table.best_group[Index(d)] = best;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Stability bootstrap

std::uint64_t SplitMix64::Next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::Below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::kInvalidArgument, "bounded draw with zero bound");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = Next();
  while (x >= limit) x = Next();
  return x % bound;
}

StabilityResult StabilityBootstrap(std::span<const DimensionProfile> profiles, const WeightConfig& weights,
                                   const StabilityOptions& options) {
  weights.Validate();
  if (options.repetitions < 2) throw Error(ErrorCode::kInvalidArgument, "stability needs >= 2 repetitions");
  if (profiles.size() <= options.sample_size) {
    throw Error(ErrorCode::kInvalidArgument, "zoo of " + std::to_string(profiles.size()) +
                                                 " models is not larger than sample size " +
                                                 std::to_string(options.sample_size));
  }
  std::vector<DimensionProfile> zoo(profiles.begin(), profiles.end());
  std::sort(zoo.begin(), zoo.end(), [](const auto& a, const auto& b) { return a.model_id() < b.model_id(); });
  for (std::size_t i = 1; i < zoo.size(); ++i) {
    if (zoo[i].model_id() == zoo[i - 1].model_id()) {
      throw Error(ErrorCode::kDuplicate, "duplicate model_id '" + zoo[i].model_id() + "'");
    }
  }
  for (const auto& p : zoo) {
    if (!p.Complete()) throw Error(ErrorCode::kUnavailable, "incomplete profile '" + p.model_id() + "'");
  }

  const std::size_t reps = options.repetitions;
  std::vector<std::uint64_t> rep_seeds(reps);
  SplitMix64 master(options.seed);
  for (auto& s : rep_seeds) s = master.Next();

  std::vector<std::vector<double>> scores(reps);
  std::vector<std::vector<std::string>> samples(reps);
  auto run_rep = [&](std::size_t r) {
    SplitMix64 rng(rep_seeds[r]);
    std::vector<std::size_t> idx(zoo.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < options.sample_size; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.Below(zoo.size() - i));
      std::swap(idx[i], idx[j]);
    }
    std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(options.sample_size));
    std::sort(chosen.begin(), chosen.end());
    std::vector<DimensionProfile> sample;
    sample.reserve(chosen.size());
    for (std::size_t i : chosen) {
      sample.push_back(zoo[i]);
      samples[r].push_back(zoo[i].model_id());
    }
    const DimensionMoments moments = FitMoments(sample, options.trim_fraction);
    scores[r].reserve(zoo.size());
    for (const auto& p : zoo) scores[r].push_back(QubaScore(Standardize(p, moments), weights));
  };

  const unsigned jobs = std::max(1u, options.jobs);
  if (jobs == 1) {
    for (std::size_t r = 0; r < reps; ++r) run_rep(r);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t r = w; r < reps; r += jobs) run_rep(r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  StabilityResult result;
  result.samples = std::move(samples);
  double sum = 0.0;
  for (std::size_t a = 0; a < reps; ++a) {
    for (std::size_t b = a + 1; b < reps; ++b) {
      const double rho = Spearman(scores[a], scores[b]).rho;
      result.pairs.push_back({a, b, rho});
      sum += rho;
    }
  }
  result.mean_correlation = sum / static_cast<double>(result.pairs.size());
  return result;
}

}  // namespace quba
