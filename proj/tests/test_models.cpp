#include "hbtcert/models.hpp"
#include "hbtcert/rng.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>

using namespace hbt;

namespace {

// RK4 on the three-level rate equations, (e, g, s), from the ground state;
// written out by hand so it shares nothing with the library
std::array<double, 3> rk4_populations(const ThreeLevelParams& p, double t, int steps = 20000) {
  auto rhs = [&](const std::array<double, 3>& y) {
    const double e = y[0], g = y[1], s = y[2];
    return std::array<double, 3>{p.kappa_p * g - (p.kappa_r + p.kappa_1) * e,
                                 p.kappa_r * e - p.kappa_p * g + p.kappa_2 * s, p.kappa_1 * e - p.kappa_2 * s};
  };
  std::array<double, 3> y{0, 1, 0};
  const double h = t / steps;
  for (int i = 0; i < steps; ++i) {
    auto k1 = rhs(y);
    std::array<double, 3> y2, y3, y4;
    for (int j = 0; j < 3; ++j) y2[j] = y[j] + h / 2 * k1[j];
    auto k2 = rhs(y2);
    for (int j = 0; j < 3; ++j) y3[j] = y[j] + h / 2 * k2[j];
    auto k3 = rhs(y3);
    for (int j = 0; j < 3; ++j) y4[j] = y[j] + h * k3[j];
    auto k4 = rhs(y4);
    for (int j = 0; j < 3; ++j) y[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return y;
}

// (2/w²)∫₀^w (w−t) g(t) dt by composite Simpson
template <class F>
double bin_moment(F g, double w, int n = 4000) {
  double acc = 0;
  const double h = w / n;
  for (int i = 0; i <= n; ++i) {
    const double t = i * h;
    const double c = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += c * (w - t) * g(t);
  }
  return 2 * acc * h / 3 / (w * w);
}

// (1/w²)∫₀^w∫₀^w g(|t2 + τ − t1|) dt1 dt2 by the midpoint rule
template <class F>
double delayed_moment(F g, double w, double tau, int n = 1500) {
  double acc = 0;
  const double h = w / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) acc += g(std::abs((j + 0.5) * h + tau - (i + 0.5) * h));
  return acc * h * h / (w * w);
}

ThreeLevelParams fig6(double k2) {
  ThreeLevelParams p;
  p.kappa_p = p.kappa_r = 1;
  p.kappa_1 = 0.1;
  p.kappa_2 = k2;
  return p;
}

}  // namespace

TEST(Populations, TwoLevel) {
  TwoLevelParams p{1, 1};
  EXPECT_EQ(two_level_excited_pop(p, 0), 0);
  EXPECT_NEAR(two_level_excited_pop(p, 1), 0.5 * (1 - std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(two_level_excited_pop(p, 1e3), 0.5, 1e-15);
  // two-level = three-level with no shelving path; RK4 with κ1 tiny
  ThreeLevelParams q{1, 1, 1e-12, 1};
  EXPECT_NEAR(two_level_excited_pop(p, 1), rk4_populations(q, 1)[0], 1e-9);
}

TEST(Populations, ThreeLevelAgainstRK4) {
  for (auto p : {fig6(0.2), fig6(0.04), ThreeLevelParams{1, 0.1, 1, 1}, ThreeLevelParams{3, 0.5, 2, 0.01}}) {
    for (double t : {0.0, 0.05, 0.7, 3.0, 40.0}) {
      const double v = three_level_excited_pop(p, t);
      if (t == 0) {
        EXPECT_EQ(v, 0);
        continue;
      }
      auto y = rk4_populations(p, t);
      EXPECT_NEAR(v, y[0], 1e-8) << "t=" << t << " disc=" << p.discriminant();
      EXPECT_NEAR(y[0] + y[1] + y[2], 1, 1e-9);
    }
  }
}

TEST(Populations, ComplexBranchIsReal) {
  ThreeLevelParams p{1, 0.1, 1, 1};
  ASSERT_LT(p.discriminant(), 0);
  EXPECT_NE(p.lambda1().imag(), 0);
  EXPECT_GT(p.lambda1().real() + p.lambda2().real() + (p.nu() * (p.lambda1() - p.lambda2())).real(), 0);
  EXPECT_NEAR(three_level_excited_pop(p, 1e4), p.mu(), 1e-12);
}

TEST(Populations, BoundsAndTwoLevelMonotone) {
  auto g = make_rng(3, Purpose::misc);
  for (int i = 0; i < 2000; ++i) {
    auto r = [&] { return std::exp(8 * uniform01(g) - 4); };
    ThreeLevelParams p{r(), r(), r(), r()};
    TwoLevelParams q{p.kappa_p, p.kappa_r};
    double prev2 = 0;
    for (int j = 1; j < 200; ++j) {
      const double t = j * j * 0.002 / p.K();
      const double v3 = three_level_excited_pop(p, t), v2 = two_level_excited_pop(q, t);
      EXPECT_GE(v3, -1e-15);
      EXPECT_LE(v3, 1);
      EXPECT_GE(v2, prev2);
      prev2 = v2;
    }
  }
}

TEST(Populations, ThreeLevelOvershootsWithShelving) {
  // the bunching shoulder: ρe rises above its steady state before shelving catches up
  auto p = fig6(0.04);
  double peak = 0;
  for (int j = 1; j < 400; ++j) peak = std::max(peak, three_level_excited_pop(p, j * 0.05));
  EXPECT_GT(peak, 1.5 * p.mu());
}

TEST(Populations, DegenerationChain) {
  TwoLevelParams q{1.3, 0.7};
  ThreeLevelParams p{1.3, 0.7, 1e-10, 0.5};
  for (double t : {0.01, 0.3, 2.0, 10.0})
    EXPECT_NEAR(three_level_excited_pop(p, t) / two_level_excited_pop(q, t), 1, 1e-6);
  for (double w : {1e-5, 0.01, 0.5, 3.0, 50.0}) EXPECT_NEAR(f3(p, w) / f2(q.K(), w), 1, 1e-6);
  ClassicalNoiseParams n;
  n.n_bar = 0.2;
  DetectionParams d{1e-4};
  for (double w : {0.01, 1.0, 10.0}) {
    auto a = analytic_correlations_3ls_poisson(p, n.n_bar, d, w);
    auto b = analytic_correlations_2ls_noise(q, n, d, w);
    EXPECT_NEAR(a.alpha, b.alpha, 1e-6);
    EXPECT_NEAR(a.gamma, b.gamma, 1e-6);
    EXPECT_NEAR(a.beta, b.beta, 1e-9);
  }
}

TEST(F2, LimitsAndQuadrature) {
  for (double x : {1e-7, 1e-5, 5e-5}) EXPECT_NEAR(f2(1, x) / (x / 3), 1, 1e-4);
  EXPECT_NEAR(f2(1, 1e6), 1, 1e-5);
  EXPECT_EQ(f2(1, 0), 0);
  double prev = 0;
  for (double x = 1e-6; x < 1e4; x *= 1.3) {
    const double v = f2(1, x);
    EXPECT_GT(v, prev);
    EXPECT_LT(v, 1);
    prev = v;
  }
  // α of the noiseless two-level bin = bin moment of g2(t) = 1 − e^{−Kt}
  for (double K : {0.3, 1.0, 7.0})
    for (double w : {0.05, 1.0, 4.0})
      EXPECT_NEAR(f2(K, w), bin_moment([&](double t) { return -std::expm1(-K * t); }, w), 1e-11);
  // series/closed-form handover is smooth
  EXPECT_NEAR(f2(1, 0.99999e-4), f2(1, 1.00001e-4), 1e-9);
}

TEST(F3, QuadratureAndLimits) {
  for (auto p : {fig6(0.2), fig6(0.04), ThreeLevelParams{1, 0.1, 1, 1}}) {
    for (double w : {0.02, 0.5, 5.0, 60.0}) {
      const double oracle = bin_moment([&](double t) { return three_level_excited_pop(p, t) / p.mu(); }, w, 20000);
      EXPECT_NEAR(f3(p, w), oracle, 1e-7) << w;
    }
    EXPECT_NEAR(f3(p, 1e-9), 0, 1e-8);
    // either side of the series handover
    for (double x : {0.99e-4, 1.01e-4}) {
      const double w = x / p.K();
      const double oracle = bin_moment([&](double t) { return three_level_excited_pop(p, t) / p.mu(); }, w);
      EXPECT_NEAR(f3(p, w) / oracle, 1, 1e-10);
    }
  }
  // strong shelving pushes α above 1 at intermediate w
  double mx = 0;
  for (double w = 0.1; w < 500; w *= 1.2) mx = std::max(mx, f3(fig6(0.04), w));
  EXPECT_GT(mx, 1);
  // degenerate-root guard
  ThreeLevelParams d;
  d.kappa_p = 1, d.kappa_r = 1, d.kappa_1 = 1;
  // choose κ2 so that K² = 4σ:  (3+k)² = 4(3k + 1) → k² − 6k + 5 = 0 → k = 1 or 5
  d.kappa_2 = 1;
  EXPECT_NEAR(d.discriminant(), 0, 1e-12);
  EXPECT_NEAR(f3(d, 0.7), bin_moment([&](double t) { return rk4_populations(d, t, 4000)[0] / d.mu(); }, 0.7, 200), 1e-5);
}

TEST(Noisy2LS, Examples) {
  TwoLevelParams p{1, 1};
  DetectionParams d{1e-3};
  ClassicalNoiseParams none;
  for (double w : {1e-3, 0.1, 1.0, 10.0, 40.0}) EXPECT_GT(analytic_correlations_2ls_noise(p, none, d, w).gamma, 1);
  ClassicalNoiseParams pois;
  pois.n_bar = 3;
  for (double w : {0.1, 1.0, 5.0})
    EXPECT_DOUBLE_EQ(analytic_correlations_2ls_noise(p, pois, d, w).beta, analytic_correlations_2ls_noise(p, none, d, w).beta);
}

TEST(Noisy2LS, W0RelationRoundTrip) {
  TwoLevelParams p{1, 1};
  DetectionParams d{1e-4};
  for (double g : {1.5, 3.0, 10.0}) {
    for (double w0 : {0.3, 2.0, 10.0}) {
      ClassicalNoiseParams n;
      n.profile = NoiseProfile::boxcar(g, INFINITY);
      n.n_bar = w0_relation_2ls(p, n.g_tilde(w0), w0) * p.eta();
      auto t = analytic_correlations_2ls_noise(p, n, d, w0);
      EXPECT_NEAR(t.alpha, 1, 1e-9);
      EXPECT_NEAR(t.beta, 1, 1e-9);
      EXPECT_NEAR(t.gamma, 1, 1e-9);
    }
  }
  EXPECT_THROW(w0_relation_2ls(p, 4.0, 2.0), ValidationError);  // g̃ = w0²: Poisson
  EXPECT_GT(w0_relation_2ls(p, 4.0 * (1 + 1e-12), 2.0), 1e5);
}

TEST(Noisy2LS, W0RelationAgainstRootFinding) {
  // γ(w0) = 1 ⇔ 1 − f2 = (r−1)ρ²; bisection on ρ with a quadrature f2
  TwoLevelParams p{2, 3};
  for (double w0 : {0.5, 5.0, 50.0, 500.0}) {
    const double r = 2.5;
    const double one_minus_f = 1 - bin_moment([&](double t) { return -std::expm1(-p.K() * t); }, w0, 40000);
    double lo = 0, hi = 100;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (one_minus_f - (r - 1) * mid * mid > 0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(w0_relation_2ls(p, r * w0 * w0, w0), lo, 1e-7 * lo);
    if (w0 >= 50) EXPECT_NEAR(w0_relation_2ls(p, r * w0 * w0, w0) * std::sqrt(p.K() * w0 * (r - 1) / 2), 1, 0.05);
  }
}

TEST(Noisy3LS, NoiseDomination) {
  auto p = fig6(0.12);
  DetectionParams d{1e-4};
  auto t = analytic_correlations_3ls_poisson(p, 1e9, d, 1.0);
  EXPECT_NEAR(t.alpha, 1, 1e-8);
  EXPECT_NEAR(t.gamma, 1, 1e-8);
  EXPECT_NEAR(t.beta, 1, 1e-8);
}

TEST(Noisy3LS, Fig6LocatesCertifiableState) {
  // noiseless κ2 = 0.12: γ̄ − 1 above F·R with R = Tηw0/2
  auto p = fig6(0.12);
  DetectionParams d{1e-4};
  double gbar = 0;
  for (double w = 0.01; w < 1e3; w *= 1.05) gbar = std::max(gbar, analytic_correlations_3ls_poisson(p, 0, d, w).gamma);
  EXPECT_GT(gbar, 1);
}

TEST(DelayedAlpha, LimitsAndContinuity) {
  EXPECT_NEAR(analytic_alpha_2ls(2, 1, 1e3), 1, 1e-12);
  auto g = make_rng(4, Purpose::misc);
  for (int i = 0; i < 200; ++i) {
    const double K = std::exp(6 * uniform01(g) - 3), w = std::exp(6 * uniform01(g) - 3);
    EXPECT_NEAR(analytic_alpha_2ls(K, w, 0), f2(K, w), 1e-11);
    EXPECT_NEAR(analytic_alpha_2ls(K, w, w * (1 - 1e-12)), analytic_alpha_2ls(K, w, w * (1 + 1e-12)), 1e-9);
    EXPECT_LE(analytic_alpha_2ls(K, w, w * 3 * uniform01(g)), 1);
  }
}

TEST(DelayedAlpha, Quadrature) {
  for (double K : {1.7, 0.4})
    for (double w : {1.0, 2.5})
      for (double tau : {0.0, 0.3, 0.99, 1.7, 4.0}) {
        const double q = delayed_moment([&](double t) { return -std::expm1(-K * t); }, w, tau);
        EXPECT_NEAR(analytic_alpha_2ls(K, w, tau), q, 2e-5) << K << " " << w << " " << tau;
      }
}

TEST(MixtureAlpha, Examples) {
  auto flat = [](double) { return 1.0; };
  EXPECT_EQ(alpha_mixture_vs_tau(1, 2, 0, flat, 0), 0);
  EXPECT_NEAR(alpha_mixture_vs_tau(1, 2, 0, flat, 100), 1, 1e-15);
  // constant g: sup − inf over τ equals μ²/(μ+n̄)², maximal (=1) without noise
  double best = 0;
  for (double nb : {0.0, 0.01, 0.3, 1.0, 5.0})
    for (double gg : {1.0, 2.0, 10.0}) {
      auto c = [gg](double) { return gg; };
      const double span = alpha_mixture_vs_tau(1, 2, nb, c, 1e3) - alpha_mixture_vs_tau(1, 2, nb, c, 0);
      EXPECT_LE(span, 1 + 1e-15);
      best = std::max(best, span);
    }
  EXPECT_NEAR(best, 1, 1e-12);
}

TEST(Ensemble, SmallWindowLimits) {
  EXPECT_EQ(simple_ensemble_limits(1, 1, 0, 0.01).alpha, 0);
  EXPECT_DOUBLE_EQ(simple_ensemble_limits(1, 2, 0, 0.01).gamma, simple_ensemble_limits(4, 2, 0, 0.01).gamma);
  EXPECT_DOUBLE_EQ(simple_ensemble_limits(3, 2, 5, 0.01).alpha, simple_ensemble_limits(3, 0.2, 0.5, 0.01).alpha);
  EXPECT_THROW(simple_ensemble_limits(0, 1, 0, 1), ValidationError);
}

TEST(ClickExpansion, CoherentFixedPoint) {
  for (double T : {1e-3, 0.1, 0.5}) {
    auto t = corrected_click_expansion({2.0, 1.0, 1.0}, T);
    EXPECT_DOUBLE_EQ(t.alpha, 1);
    EXPECT_DOUBLE_EQ(t.beta, 1);
    EXPECT_DOUBLE_EQ(t.gamma, 1);
  }
}

TEST(ClickExpansion, ThermalAgainstExact) {
  // single-mode thermal light: P(no click at one detector) = 1/(1+ε), at both = 1/(1+2ε)
  auto exact = [](double e) {
    const double p0 = 1 / (1 + e), p00 = 1 / (1 + 2 * e), p1 = 1 - p0, p11 = 1 - 2 * p0 + p00, p10 = p0 - p00;
    return CorrelationTriple{p11 / (p1 * p1), p00 / (p0 * p0), p10 / (p0 * p1)};
  };
  double prev_a = 0, prev_g = 0, prev_b = 0;
  for (double e : {0.04, 0.02, 0.01, 0.005}) {
    auto x = exact(e);
    auto t = corrected_click_expansion({2 * e, 2.0, 6.0}, 1.0);
    EXPECT_GT(t.alpha, 1);
    EXPECT_LT(t.gamma, 1);
    // residuals of order ε², ε³, ε⁴: halving ε divides them by 4, 8, 16
    const double ra = std::abs(t.alpha - x.alpha), rg = std::abs(t.gamma - x.gamma), rb = std::abs(t.beta - x.beta);
    if (prev_a > 0) {
      EXPECT_NEAR(prev_a / ra, 4, 0.4);
      EXPECT_NEAR(prev_g / rg, 8, 0.8);
      EXPECT_NEAR(prev_b / rb, 16, 1.6);
    }
    prev_a = ra, prev_g = rg, prev_b = rb;
  }
}

TEST(ClickExpansion, ReducesToFirstOrder) {
  // deviation from (g2, 1−ε²(1−g2), 1+ε(1−g2)) vanishes like T² (γ) — Richardson ratio 4
  FieldMoments m{1.0, 0.4, 0.1};
  auto dev = [&](double T) {
    auto t = corrected_click_expansion(m, T);
    const double e = T * m.n_tilde / 2;
    return t.gamma - (1 + e * (1 - m.g2_tilde));
  };
  EXPECT_NEAR(dev(0.02) / dev(0.01), 4, 1e-9);
}

TEST(NoiseProfile, BoundsOnRandomProfiles) {
  auto g = make_rng(6, Purpose::misc);
  for (int i = 0; i < 40; ++i) {
    std::vector<double> tau{0}, g2{1 + 9 * uniform01(g)};
    for (int k = 0; k < 6; ++k) {
      tau.push_back(tau.back() + uniform01(g) + 1e-3);
      g2.push_back(1 + (g2.back() - 1) * uniform01(g));
    }
    auto prof = NoiseProfile::tabulated(tau, g2);
    for (double w : {1e-3, 0.5, 2.0, 10.0, 100.0}) {
      const double m = prof.normalized_moment(w);
      EXPECT_GE(m, 1 - 1e-12);
      EXPECT_LE(m, prof.g2_zero() + 1e-12);
      EXPECT_NEAR(m, bin_moment([&](double t) { return prof.g2(t); }, w, 400000), 1e-7);
    }
  }
}

TEST(NoiseProfile, ClosedFormsAgainstQuadrature) {
  auto e = NoiseProfile::exponential(3, 0.7);
  auto b = NoiseProfile::boxcar(2.5, 1.3);
  for (double w : {0.01, 0.5, 1.3, 4.0, 30.0}) {
    EXPECT_NEAR(e.normalized_moment(w), bin_moment([&](double t) { return e.g2(t); }, w), 1e-9);
    // step at c: 1 + (g−1)(2wc − c²)/w² once the window passes it
    const double c = std::min(1.3, w);
    EXPECT_NEAR(b.normalized_moment(w), 1 + 1.5 * (2 * w * c - c * c) / (w * w), 1e-12);
  }
  EXPECT_EQ(NoiseProfile::poisson().normalized_moment(5), 1);
  EXPECT_EQ(NoiseProfile::boxcar(4, INFINITY).normalized_moment(1e9), 4);
  EXPECT_THROW(NoiseProfile::exponential(0.5, 1), ValidationError);
  EXPECT_THROW(NoiseProfile::tabulated({0, 1}, {1, 2}), ValidationError);
}

TEST(WaitingTime, DensityIntegratesToCdf) {
  for (auto p : {fig6(0.12), ThreeLevelParams{1, 0.1, 1, 1}}) {
    double acc = 0, prev = three_level_waiting_density(p, 0);
    const double h = 0.01;
    for (int i = 1; i <= 20000; ++i) {
      const double v = three_level_waiting_density(p, i * h);
      acc += 0.5 * h * (prev + v);
      prev = v;
      if (i % 5000 == 0) EXPECT_NEAR(acc, three_level_waiting_cdf(p, i * h), 1e-5);
    }
    EXPECT_NEAR(three_level_waiting_cdf(p, 1e4), 1, 1e-9);
    // mean waiting time = 1/η for a renewal process
    double mean = 0;
    for (int i = 0; i < 400000; ++i) mean += (1 - three_level_waiting_cdf(p, (i + 0.5) * 0.005)) * 0.005;
    EXPECT_NEAR(mean * p.eta(), 1, 1e-4);
  }
}

TEST(FirstOrder, SuccessRate) {
  EXPECT_DOUBLE_EQ(analytic_success_rate(2, 1, 0.1, 4), 0.6);
  EXPECT_DOUBLE_EQ(first_order_p1(2, 0.1, 4), 0.4);
}
