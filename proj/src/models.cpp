#include "hbtcert/models.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hbt {

using cd = std::complex<double>;

void TwoLevelParams::validate() const {
  if (!(kappa_p > 0) || !(kappa_r > 0)) throw ValidationError("two-level rates must be positive");
}

void ThreeLevelParams::validate() const {
  std::ostringstream bad;
  if (!(kappa_p > 0)) bad << " kappa_p";
  if (!(kappa_r > 0)) bad << " kappa_r";
  if (!(kappa_1 > 0)) bad << " kappa_1";
  if (!(kappa_2 > 0)) bad << " kappa_2";
  if (!bad.str().empty()) throw ValidationError("three-level rates must be positive:" + bad.str());
}

void DetectionParams::validate() const {
  if (!(T > 0 && T <= 1)) throw ValidationError("efficiency T must lie in (0, 1]");
}

static cd sqrt_disc(const ThreeLevelParams& p) { return std::sqrt(cd(p.discriminant(), 0.0)); }

cd ThreeLevelParams::lambda1() const { return 0.5 * (K() + sqrt_disc(*this)); }
cd ThreeLevelParams::lambda2() const { return 0.5 * (K() - sqrt_disc(*this)); }
cd ThreeLevelParams::nu() const {
  return (sigma() + kappa_1 * kappa_p - kappa_2 * kappa_2) / (kappa_2 * sqrt_disc(*this));
}

Eigen::Matrix3d three_level_generator(const ThreeLevelParams& p) {
  Eigen::Matrix3d Q;
  // rows/cols: e, g, s
  Q << -(p.kappa_r + p.kappa_1), p.kappa_p, 0,
       p.kappa_r, -p.kappa_p, p.kappa_2,
       p.kappa_1, 0, -p.kappa_2;
  return Q;
}

// ---------------------------------------------------------------- noise

NoiseProfile NoiseProfile::poisson() { return NoiseProfile{}; }

NoiseProfile NoiseProfile::boxcar(double g, double tau_c) {
  if (!(g >= 1)) throw ValidationError("noise g2(0) must be >= 1");
  if (!(tau_c > 0)) throw ValidationError("noise correlation time must be positive");
  NoiseProfile n;
  n.kind_ = Kind::boxcar;
  n.g_ = g;
  n.tau_c_ = tau_c;
  return n;
}

NoiseProfile NoiseProfile::exponential(double g, double tau_c) {
  if (!(g >= 1)) throw ValidationError("noise g2(0) must be >= 1");
  if (!(tau_c > 0) || !std::isfinite(tau_c)) throw ValidationError("noise correlation time must be positive and finite");
  NoiseProfile n;
  n.kind_ = Kind::exponential;
  n.g_ = g;
  n.tau_c_ = tau_c;
  return n;
}

NoiseProfile NoiseProfile::tabulated(std::vector<double> tau, std::vector<double> g2) {
  if (tau.size() != g2.size() || tau.empty()) throw ValidationError("tabulated profile: size mismatch");
  if (tau[0] != 0) throw ValidationError("tabulated profile must start at tau=0");
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (!(g2[i] >= 1)) throw ValidationError("tabulated profile: g2 must be >= 1");
    if (i && !(tau[i] > tau[i - 1])) throw ValidationError("tabulated profile: tau must increase");
    if (i && g2[i] > g2[i - 1]) throw ValidationError("tabulated profile: g2 must be non-increasing");
  }
  NoiseProfile n;
  n.kind_ = Kind::tabulated;
  n.g_ = g2[0];
  n.tau_ = std::move(tau);
  n.tab_ = std::move(g2);
  return n;
}

double NoiseProfile::g2(double tau) const {
  tau = std::abs(tau);
  switch (kind_) {
    case Kind::poisson: return 1;
    case Kind::boxcar: return tau < tau_c_ ? g_ : 1;
    case Kind::exponential: return 1 + (g_ - 1) * std::exp(-tau / tau_c_);
    case Kind::tabulated: {
      if (tau >= tau_.back()) return tab_.back();
      auto it = std::upper_bound(tau_.begin(), tau_.end(), tau);
      std::size_t i = static_cast<std::size_t>(it - tau_.begin()) - 1;
      double s = (tau - tau_[i]) / (tau_[i + 1] - tau_[i]);
      return tab_[i] + s * (tab_[i + 1] - tab_[i]);
    }
  }
  return 1;
}

double NoiseProfile::normalized_moment(double w) const {
  if (!(w > 0)) return g_;
  switch (kind_) {
    case Kind::poisson: return 1;
    case Kind::boxcar: {
      if (!std::isfinite(tau_c_) || w <= tau_c_) return g_;
      const double rest = w - tau_c_;
      return 1 + (g_ - 1) * (1 - rest * rest / (w * w));
    }
    case Kind::exponential: return 1 + (g_ - 1) * 2 * f_over_sq(w / tau_c_);
    case Kind::tabulated: {
      // ∫(w−t)(a+bt)dt = a(wt − t²/2) + b(wt²/2 − t³/3)
      auto prim = [w](double a, double b, double t) { return a * (w * t - t * t / 2) + b * (w * t * t / 2 - t * t * t / 3); };
      double acc = 0;
      for (std::size_t i = 0; i + 1 < tau_.size() && tau_[i] < w; ++i) {
        const double t0 = tau_[i], t1 = std::min(tau_[i + 1], w);
        const double b = (tab_[i + 1] - tab_[i]) / (tau_[i + 1] - tau_[i]);
        const double a = tab_[i] - b * t0;
        acc += prim(a, b, t1) - prim(a, b, t0);
      }
      if (tau_.back() < w) {
        const double t0 = tau_.back();
        acc += prim(tab_.back(), 0, w) - prim(tab_.back(), 0, t0);
      }
      return 2 * acc / (w * w);
    }
  }
  return 1;
}

// ---------------------------------------------------------------- populations

double two_level_excited_pop(const TwoLevelParams& p, double t) {
  if (t <= 0) return 0;
  return p.kappa_p / p.K() * -std::expm1(-p.K() * t);
}

double three_level_excited_pop(const ThreeLevelParams& p, double t) {
  if (t <= 0) return 0;
  // (1+ν)/2 e^{−λ1 t} + (1−ν)/2 e^{−λ2 t} = (e1+e2)/2 + (A/2)(e1−e2)/d,  A = νd
  const double A = (p.sigma() + p.kappa_1 * p.kappa_p - p.kappa_2 * p.kappa_2) / p.kappa_2;
  const cd d = sqrt_disc(p);
  const cd l1 = 0.5 * (p.K() + d), l2 = 0.5 * (p.K() - d);
  const cd e1 = std::exp(-l1 * t), e2 = std::exp(-l2 * t);
  cd diff_over_d;
  const cd h = 0.5 * d * t;
  if (std::abs(h) < 1e-4)
    diff_over_d = -std::exp(-0.5 * p.K() * t) * t * (1.0 + h * h / 6.0);
  else
    diff_over_d = (e1 - e2) / d;
  const cd mix = 0.5 * (e1 + e2) + 0.5 * A * diff_over_d;
  return p.mu() * (1 - mix.real());
}

// ---------------------------------------------------------------- f-functions

double f2(double K, double w) {
  if (w <= 0) return 0;
  const double x = K * w;
  if (x < 1e-4) return x * (1.0 / 3 + x * (-1.0 / 12 + x * (1.0 / 60 - x / 360)));
  return 1 - 2 * (x + std::expm1(-x)) / (x * x);
}

double f3(const ThreeLevelParams& p, double w) {
  if (w <= 0) return 0;
  const double K = p.K(), s = p.sigma();
  const double A = (s + p.kappa_1 * p.kappa_p - p.kappa_2 * p.kappa_2) / p.kappa_2;
  if (K * w < 1e-4) {
    // f3 = −Σ_{n≥1} (−w)^n M_n/(n+2)!,  M_n = (λ1^n+λ2^n) + A(λ1^n−λ2^n)/d
    const double S1 = K, S2 = K * K - 2 * s, S3 = K * K * K - 3 * s * K, S4 = K * K * K * K - 4 * s * K * K + 2 * s * s;
    const double D1 = 1, D2 = K, D3 = K * K - s, D4 = K * (K * K - 2 * s);
    const double M1 = S1 + A * D1, M2 = S2 + A * D2, M3 = S3 + A * D3, M4 = S4 + A * D4;
    return w * M1 / 6 - w * w * M2 / 24 + w * w * w * M3 / 120 - w * w * w * w * M4 / 720;
  }
  cd d = sqrt_disc(p);
  if (std::abs(d) < 1e-6 * K) d = (d.imag() != 0 ? cd(0, 1e-6 * K) : cd(1e-6 * K, 0));  // degenerate roots
  const cd l1 = 0.5 * (K + d), l2 = 0.5 * (K - d);
  const cd p1 = f_over_sq(l1 * w), p2 = f_over_sq(l2 * w);
  const cd v = (p1 + p2) + A * (p1 - p2) / d;
  return 1 - v.real();
}

// ---------------------------------------------------------------- correlations

CorrelationTriple first_order_correlations(double eta, double f, double n_bar, double r, double T, double w) {
  CorrelationTriple t;
  if (!(eta > 0)) {
    // noise only
    t.alpha = r;
    t.beta = 1 - std::pow(n_bar * w * T / 2, 2) * (1 - r);
    t.gamma = 1 + n_bar * w * T / 2 * (1 - r);
    return t;
  }
  const double rho = n_bar / eta;
  const double bracket = 1 - f + (1 - r) * rho * rho;
  const double x = eta * w * T / 2;
  t.alpha = 1 + (f - 1 + (r - 1) * rho * rho) / ((1 + rho) * (1 + rho));
  t.beta = 1 - x * x * bracket;
  t.gamma = 1 + x / (1 + rho) * bracket;
  return t;
}

static void check_first_order(double flux, double T, double w) {
  if (T * flux * w > 0.1)
    warn("first-order expansion outside its regime: T*(eta+n_bar)*w = " + std::to_string(T * flux * w));
}

CorrelationTriple analytic_correlations_2ls_noise(const TwoLevelParams& p, const ClassicalNoiseParams& noise,
                                                  const DetectionParams& det, double w) {
  check_first_order(p.eta() + noise.n_bar, det.T, w);
  return first_order_correlations(p.eta(), f2(p.K(), w), noise.n_bar, noise.profile.normalized_moment(w), det.T, w);
}

CorrelationTriple analytic_correlations_3ls_poisson(const ThreeLevelParams& p, double n_bar,
                                                    const DetectionParams& det, double w) {
  check_first_order(p.eta() + n_bar, det.T, w);
  return first_order_correlations(p.eta(), f3(p, w), n_bar, 1.0, det.T, w);
}

double first_order_p1(double flux, double T, double w) { return T * flux * w / 2; }

double analytic_success_rate(double eta, double n_bar, double T, double w0) { return T * (eta + n_bar) * w0 / 2; }

double analytic_alpha_2ls(double K, double w, double tau) {
  tau = std::abs(tau);
  const double x = K * w;
  double J;  // K² ∫∫ e^{−K|t2−t1|}
  if (tau >= w) {
    J = std::exp(-K * (tau - w)) * std::pow(-std::expm1(-x), 2);
  } else {
    const double a = K * (tau + w), b = K * (w - tau), c = K * tau;
    J = (a + std::expm1(-a)) + (b + std::expm1(-b)) - 2 * (c + std::expm1(-c));
  }
  return 1 - J / (x * x);
}

double alpha_mixture_vs_tau(double mu, double K, double n_bar, const std::function<double(double)>& g2_of_tau,
                            double tau) {
  const double g = g2_of_tau(tau);
  const double s = mu + n_bar;
  return (mu * mu * -std::expm1(-K * std::abs(tau)) + 2 * mu * n_bar + g * n_bar * n_bar) / (s * s);
}

double w0_relation_2ls(const TwoLevelParams& p, double g_tilde_at_w0, double w0) {
  if (!(w0 > 0)) throw ValidationError("w0 must be positive");
  const double r = g_tilde_at_w0 / (w0 * w0);
  if (!(r > 1))
    throw ValidationError("no noise level makes all correlations unity: noise must be super-Poissonian "
                          "(g_tilde(w0) > w0^2)");
  const double x = p.K() * w0;
  return std::sqrt(2 * f_over_sq(x) / (r - 1));
}

CorrelationTriple simple_ensemble_limits(int N, double eta, double n_bar, double w) {
  if (N < 1 || !(eta > 0)) throw ValidationError("need N >= 1 and eta > 0");
  const double n = N;
  CorrelationTriple t;
  const double q = n + n_bar / eta;
  t.alpha = 1 - n / (q * q);
  t.beta = 1 - std::pow(n * eta * w, 2) / 4;
  t.gamma = 1 + n * eta * eta * w / (2 * (n * eta + n_bar));
  return t;
}

CorrelationTriple corrected_click_expansion(const FieldMoments& m, double T) {
  const double e = T * m.n_tilde / 2;
  if (e >= 0.3) warn("click expansion outside its regime: T*n/2 = " + std::to_string(e));
  const double g2 = m.g2_tilde, g3 = m.g3_tilde;
  CorrelationTriple t;
  t.alpha = g2 + e * (g2 * g2 - g3);
  t.beta = 1 - e * e * (1 - g2) + e * e * e * (3 * g2 - g3 - 2);
  t.gamma = 1 + e * (1 - g2) + e * e * (1 + g3 - 1.5 * g2 - 0.5 * g2 * g2);
  return t;
}

// states e, g, s; the radiative e→g jump is the absorbing "emission" event
static Eigen::Vector3d no_emission_state(const ThreeLevelParams& p, double t) {
  Eigen::Matrix3d Q = three_level_generator(p);
  Q(1, 0) = 0;  // drop the radiative return into g
  Eigen::Matrix3d E = (Q * t).exp();
  return E.col(1);
}

double three_level_waiting_density(const ThreeLevelParams& p, double t) {
  if (t < 0) return 0;
  return p.kappa_r * no_emission_state(p, t)(0);
}

double three_level_waiting_cdf(const ThreeLevelParams& p, double t) {
  if (t <= 0) return 0;
  return 1 - no_emission_state(p, t).sum();
}

}  // namespace hbt
