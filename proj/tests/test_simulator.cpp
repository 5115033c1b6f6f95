#include "hbtcert/correlator.hpp"
#include "hbtcert/simulator.hpp"
#include "hbtcert/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace hbt;

namespace {

ThreeLevelParams shelved(double k2) {
  // GHz-scale rates in 1/s
  return ThreeLevelParams{1e9, 1e9, 1e8, k2};
}

CorrelationTriple triple_at(const TimeTagStream& s, std::int64_t w, std::int64_t tau = 0) {
  return correlation_triple(click_probabilities(count_bin_events(s, w, tau)));
}

std::vector<double> gaps_s(const std::vector<Timestamp>& t) {
  std::vector<double> g;
  for (std::size_t i = 1; i < t.size(); ++i) g.push_back((t[i] - t[i - 1]) * 1e-12);
  return g;
}

// two-sample Kolmogorov–Smirnov statistic
double ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

EmitterScenario base(double T, double dur) {
  EmitterScenario sc;
  sc.model = TwoLevelParams{1e9, 1e9};
  sc.det.T = T;
  sc.duration_s = dur;
  sc.seed = 11;
  sc.resolution_ps = 1;
  return sc;
}

}  // namespace

TEST(Emission, RateMatchesEta) {
  for (EmitterModel m : {EmitterModel{TwoLevelParams{1e9, 1e9}}, EmitterModel{shelved(4e7)}}) {
    const double eta = std::visit([](auto& p) { return p.eta(); }, m);
    auto e = simulate_emission(m, 0.01, 5);
    const double n = eta * 0.01;
    // renewal count: variance ≤ a few × mean for these rates
    EXPECT_NEAR(e.size(), n, 10 * std::sqrt(n));
    EXPECT_TRUE(std::is_sorted(e.begin(), e.end()));
    EXPECT_TRUE(std::adjacent_find(e.begin(), e.end()) == e.end());
    EXPECT_LT(e.back(), 10'000'000'000ull);
  }
}

TEST(Emission, ThreeLevelWaitingTimeChiSquare) {
  // slower rates keep ps rounding negligible
  ThreeLevelParams p{1e8, 1e8, 1e7, 4e6};
  auto gaps = gaps_s(simulate_emission(p, 0.1, 9));
  ASSERT_GT(gaps.size(), 50000u);
  // equal-probability edges by bisection on the analytic cdf
  const int k = 25;
  std::vector<double> edges{0};
  for (int i = 1; i < k; ++i) {
    double lo = 0, hi = 1e-3;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (three_level_waiting_cdf(p, mid) < double(i) / k ? lo : hi) = mid;
    }
    edges.push_back(lo);
  }
  edges.push_back(INFINITY);
  std::vector<double> obs(k);
  for (double g : gaps) obs[std::upper_bound(edges.begin(), edges.end(), g) - edges.begin() - 1] += 1;
  double chi2 = 0;
  const double expct = double(gaps.size()) / k;
  for (double o : obs) chi2 += (o - expct) * (o - expct) / expct;
  EXPECT_LT(chi2, 51.2);  // χ²(24) at p = 1e-3
}

TEST(Emission, CollapsedMatchesExplicitThinning) {
  for (EmitterModel m : {EmitterModel{TwoLevelParams{1e9, 3e8}}, EmitterModel{shelved(2e7)}}) {
    const double T = 0.3;
    auto full = simulate_emission(m, 0.002, 21);
    auto g = make_rng(22, Purpose::misc);
    std::vector<Timestamp> kept;
    for (auto t : full)
      if (uniform01(g) < T) kept.push_back(t);
    auto col = simulate_detected_emission(m, T, 0.002, 23);
    auto a = gaps_s(kept), b = gaps_s(col);
    ASSERT_GT(a.size(), 50000u);
    const double crit = 1.95 * std::sqrt(double(a.size() + b.size()) / (double(a.size()) * b.size()));
    EXPECT_LT(ks(a, b), crit);
    EXPECT_NEAR(double(b.size()) / a.size(), 1, 0.03);
  }
}

TEST(Dataset, DetectedRatesPerChannel) {
  auto sc = base(0.2, 0.02);
  sc.sampler = Sampler::explicit_path;
  auto d = simulate_dataset(sc);
  const double expect = sc.emission_rate() * sc.det.T / 2 * sc.duration_s;
  for (auto c : {Channel::a, Channel::b}) EXPECT_NEAR(d.stream.channel(c).size(), expect, 6 * std::sqrt(expect));
}

TEST(Dataset, AutoSamplerRule) {
  auto sc = base(0.2, 0.01);  // 5e6 emissions, T < 0.5
  EXPECT_EQ(simulate_dataset(sc).sampler_used, Sampler::collapsed);
  sc.det.T = 0.6;
  EXPECT_EQ(simulate_dataset(sc).sampler_used, Sampler::explicit_path);
  sc.det.T = 0.2;
  sc.duration_s = 1e-3;  // 5e5 emissions
  EXPECT_EQ(simulate_dataset(sc).sampler_used, Sampler::explicit_path);
}

TEST(Dataset, SamplersAgreeOnCorrelations) {
  auto sc = base(0.05, 0.05);
  sc.model = shelved(4e7);
  sc.sampler = Sampler::explicit_path;
  auto x = simulate_dataset(sc).stream;
  sc.sampler = Sampler::collapsed;
  auto y = simulate_dataset(sc).stream;
  for (std::int64_t w : {500, 5000, 50000}) {
    auto a = triple_at(x, w), b = triple_at(y, w);
    EXPECT_NEAR(a.alpha, b.alpha, 0.06 * a.alpha) << w;
    EXPECT_NEAR(a.gamma, b.gamma, 0.01) << w;
  }
}

TEST(Dataset, Deterministic) {
  auto sc = base(0.3, 0.002);
  sc.n_emitters = 3;
  sc.noise = NoiseSpec{NoiseSpec::Type::exp_bunched, 1e6, 2, 1e-8};
  sc.survival = 0.8;
  auto a = simulate_dataset(sc, 1), b = simulate_dataset(sc, 1), c = simulate_dataset(sc, 4);
  EXPECT_TRUE(a.stream == b.stream);
  EXPECT_TRUE(a.stream == c.stream);
  sc.seed = 12;
  EXPECT_FALSE(a.stream == simulate_dataset(sc).stream);
}

TEST(Dataset, ResolutionGrid) {
  auto sc = base(0.5, 0.001);
  sc.resolution_ps = 81;
  auto d = simulate_dataset(sc);
  for (auto c : {Channel::a, Channel::b})
    for (auto t : d.stream.channel(c)) ASSERT_EQ(t % 81, 0u);
}

TEST(Detection, DeadTimeRule) {
  // routing draws don't depend on the dead time, so the dead-time run must equal
  // the naive per-channel filter applied to the run without it
  auto em = simulate_emission(TwoLevelParams{1e9, 1e9}, 0.001, 3);
  DetectionParams det{0.7};
  const std::uint64_t dead = 3000;
  auto free = hbt_split(em, 1'000'000'000, 1, det, 0, 4);
  auto dt = hbt_split(em, 1'000'000'000, 1, det, dead, 4);
  for (auto c : {Channel::a, Channel::b}) {
    std::vector<Timestamp> naive;
    for (auto t : free.channel(c))
      if (naive.empty() || t - naive.back() >= dead) naive.push_back(t);
    auto got = dt.channel(c);
    ASSERT_EQ(naive.size(), got.size());
    EXPECT_TRUE(std::equal(naive.begin(), naive.end(), got.begin()));
  }
  // dead time suppresses equal-time pairs only within a channel
  EXPECT_GT(dt.channel_a().size(), 0u);
}

TEST(Detection, RoutingIsFair) {
  auto em = simulate_emission(TwoLevelParams{1e9, 1e9}, 0.01, 3);
  auto s = hbt_split(em, 10'000'000'000, 1, DetectionParams{1}, 0, 5);
  EXPECT_EQ(s.size(), em.size());
  const double n = em.size();
  EXPECT_NEAR(s.channel_a().size(), n / 2, 5 * std::sqrt(n / 4));
}

TEST(Noise, PoissonRate) {
  auto sc = base(0.1, 0.05);
  sc.noise = NoiseSpec{NoiseSpec::Type::poisson, 2e6, 1, 0};
  auto with = simulate_dataset(sc).stream;
  sc.noise.reset();
  auto without = simulate_dataset(sc).stream;
  const double extra = double(with.size()) - double(without.size());
  EXPECT_NEAR(extra, 1e5, 5 * std::sqrt(1e5));
}

TEST(Noise, BunchedRateAndProfile) {
  const double rate = 1e5, g = 3, tc = 1e-6;
  TimeTagStream empty(1, 20'000'000'000'000);
  auto s = inject_bunched_noise(empty, rate, g, tc, 8);
  EXPECT_NEAR(double(s.size()), rate * 20, 0.02 * rate * 20);  // modulation inflates the variance
  auto prof = NoiseProfile::exponential(g, tc);
  for (double w : {1e-7, 1e-6}) {
    auto t = triple_at(s, std::llround(w * 1e12));
    EXPECT_NEAR(t.alpha, prof.normalized_moment(w), 0.05 * t.alpha) << w;
  }
  // decorrelated far beyond τc
  EXPECT_NEAR(triple_at(s, 100'000, 20'000'000).alpha, 1, 0.05);
  // g2 = 1 falls back to Poisson
  EXPECT_NEAR(triple_at(inject_bunched_noise(empty, rate, 1, tc, 8), 100'000).alpha, 1, 0.05);
}

TEST(Dataset, TwoLevelAlphaMatchesAnalytic) {
  auto sc = base(0.02, 1.0);
  sc.resolution_ps = 1;
  auto s = simulate_dataset(sc).stream;
  const double K = 2e9;
  for (std::int64_t w : {1000, 2000}) {
    EXPECT_NEAR(triple_at(s, w).alpha, f2(K, w * 1e-12), 0.05 * f2(K, w * 1e-12)) << w;
    EXPECT_NEAR(triple_at(s, w, 2 * w).alpha, analytic_alpha_2ls(K, w * 1e-12, 2e-12 * w), 0.03);
    EXPECT_GT(triple_at(s, w).gamma, 1);
  }
}

TEST(Dataset, ValidationNamesFields) {
  auto sc = base(0, -1);
  sc.model = ThreeLevelParams{1, -1, 1, 0};
  sc.n_emitters = 0;
  try {
    simulate_dataset(sc);
    FAIL();
  } catch (const ValidationError& e) {
    std::string m = e.what();
    for (auto f : {"kappa_r", "kappa_2", "T", "n_emitters", "duration_s"}) EXPECT_NE(m.find(f), std::string::npos) << f;
    EXPECT_EQ(m.find("kappa_p"), std::string::npos);
  }
}
