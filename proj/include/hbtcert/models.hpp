#pragma once

#include "hbtcert/correlator.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <vector>

namespace hbt {

// Rates in 1/s, times in s throughout this header.

struct TwoLevelParams {
  double kappa_p = 0, kappa_r = 0;
  double K() const { return kappa_p + kappa_r; }
  double eta() const { return kappa_r * kappa_p / K(); }
  void validate() const;
};

struct ThreeLevelParams {
  double kappa_p = 0, kappa_r = 0, kappa_1 = 0, kappa_2 = 0;

  double sigma() const { return kappa_2 * (kappa_p + kappa_r + kappa_1) + kappa_1 * kappa_p; }
  double K() const { return kappa_p + kappa_r + kappa_1 + kappa_2; }
  double mu() const { return kappa_2 * kappa_p / sigma(); }  // steady-state excited population
  double eta() const { return kappa_r * mu(); }
  double discriminant() const { return K() * K() - 4 * sigma(); }
  std::complex<double> lambda1() const;
  std::complex<double> lambda2() const;
  std::complex<double> nu() const;
  void validate() const;
};

// generator of d/dt (ρe, ρg, ρs)
Eigen::Matrix3d three_level_generator(const ThreeLevelParams& p);

struct DetectionParams {
  double T = 1;
  void validate() const;
};

// Shape of the classical noise G2(τ)/n̄², normalised so g2(∞)=1.
class NoiseProfile {
 public:
  enum class Kind { poisson, boxcar, exponential, tabulated };

  static NoiseProfile poisson();
  // g2 = g for τ < τc, 1 after; τc = +inf gives a constant profile
  static NoiseProfile boxcar(double g, double tau_c);
  static NoiseProfile exponential(double g, double tau_c);
  // piecewise linear through (τ_i, g2_i), held at the last value; τ_0 must be 0
  static NoiseProfile tabulated(std::vector<double> tau, std::vector<double> g2);

  Kind kind() const { return kind_; }
  double g2_zero() const { return g_; }
  double tau_c() const { return tau_c_; }
  double g2(double tau) const;
  // g̃(w)/w² = (2/w²) ∫₀^w (w−t) g2(t) dt, in [1, g]
  double normalized_moment(double w) const;

 private:
  Kind kind_ = Kind::poisson;
  double g_ = 1;
  double tau_c_ = 0;
  std::vector<double> tau_, tab_;
};

struct ClassicalNoiseParams {
  double n_bar = 0;  // photon flux before detection, 1/s
  NoiseProfile profile = NoiseProfile::poisson();
  double g_tilde(double w) const { return profile.normalized_moment(w) * w * w; }
};

// f(x) = x − 1 + e^{−x}
template <class S>
S f_lin(S x) {
  return x - S(1) + std::exp(-x);
}

// f(z)/z², series near 0
template <class S>
S f_over_sq(S z) {
  if (std::abs(z) < 1e-3) return S(0.5) + z * (S(-1.0 / 6) + z * (S(1.0 / 24) + z * (S(-1.0 / 120) + z * S(1.0 / 720))));
  return (z - S(1) + std::exp(-z)) / (z * z);
}

double two_level_excited_pop(const TwoLevelParams& p, double t);
double three_level_excited_pop(const ThreeLevelParams& p, double t);

double f2(double K, double w);
double f3(const ThreeLevelParams& p, double w);

// first-order triple for emitter flux η with normalised moment f, plus noise
// of flux n̄ with g̃/w² = r
CorrelationTriple first_order_correlations(double eta, double f, double n_bar, double r, double T, double w);

CorrelationTriple analytic_correlations_2ls_noise(const TwoLevelParams& p, const ClassicalNoiseParams& noise,
                                                  const DetectionParams& det, double w);
CorrelationTriple analytic_correlations_3ls_poisson(const ThreeLevelParams& p, double n_bar,
                                                    const DetectionParams& det, double w);

// P1 to first order, and R = P10 w0/w in the linear regime
double first_order_p1(double flux, double T, double w);
double analytic_success_rate(double eta, double n_bar, double T, double w0);

double analytic_alpha_2ls(double K, double w, double tau);

double alpha_mixture_vs_tau(double mu, double K, double n_bar, const std::function<double(double)>& g2_of_tau,
                            double tau);

// n̄/η making α=β=γ=1 at w0
double w0_relation_2ls(const TwoLevelParams& p, double g_tilde_at_w0, double w0);

CorrelationTriple simple_ensemble_limits(int N, double eta, double n_bar, double w);

struct FieldMoments {
  double n_tilde = 0;  // mean photon number in the bin before detection
  double g2_tilde = 1;
  double g3_tilde = 1;
};

// second order in ε = T ñ / 2 (the single-detector click probability)
CorrelationTriple corrected_click_expansion(const FieldMoments& m, double T);

// renewal density of the time between consecutive emissions of a three-level
// emitter (starts in g after an emission)
double three_level_waiting_density(const ThreeLevelParams& p, double t);
double three_level_waiting_cdf(const ThreeLevelParams& p, double t);

}  // namespace hbt
