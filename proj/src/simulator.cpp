#include "hbtcert/simulator.hpp"

#include "hbtcert/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hbt {

const char* sampler_name(Sampler s) {
  switch (s) {
    case Sampler::automatic: return "auto";
    case Sampler::explicit_path: return "explicit";
    case Sampler::collapsed: return "collapsed";
  }
  return "?";
}

void EmitterScenario::validate() const {
  std::vector<std::string> bad;
  auto rate_ok = [](double k) { return k > 0 && std::isfinite(k); };
  if (auto* p = std::get_if<TwoLevelParams>(&model)) {
    if (!rate_ok(p->kappa_p)) bad.push_back("kappa_p");
    if (!rate_ok(p->kappa_r)) bad.push_back("kappa_r");
  } else {
    const auto& q = std::get<ThreeLevelParams>(model);
    if (!rate_ok(q.kappa_p)) bad.push_back("kappa_p");
    if (!rate_ok(q.kappa_r)) bad.push_back("kappa_r");
    if (!rate_ok(q.kappa_1)) bad.push_back("kappa_1");
    if (!rate_ok(q.kappa_2)) bad.push_back("kappa_2");
  }
  if (!(det.T > 0 && det.T <= 1)) bad.push_back("T");
  if (n_emitters < 1) bad.push_back("n_emitters");
  if (!(survival > 0 && survival <= 1)) bad.push_back("survival");
  if (!(duration_s > 0) || !std::isfinite(duration_s) || duration_s * 1e12 >= 1.8e19) bad.push_back("duration_s");
  if (resolution_ps == 0) bad.push_back("resolution_ps");
  if (noise) {
    if (!rate_ok(noise->rate_hz)) bad.push_back("noise.rate_hz");
    if (noise->type == NoiseSpec::Type::exp_bunched) {
      if (!(noise->g2_zero >= 1) || !std::isfinite(noise->g2_zero)) bad.push_back("noise.g2_zero");
      if (!rate_ok(noise->tau_c_s)) bad.push_back("noise.tau_c_s");
    }
  }
  if (!bad.empty()) {
    std::string msg = "invalid scenario fields:";
    for (auto& b : bad) msg += " " + b;
    throw ValidationError(msg);
  }
}

std::uint64_t EmitterScenario::duration_ps() const {
  return static_cast<std::uint64_t>(std::llround(duration_s * 1e12));
}

double EmitterScenario::emission_rate() const {
  return std::visit([](const auto& p) { return p.eta(); }, model);
}

namespace {
// integer picoseconds with a fractional carry; doubles alone lose ps precision
// after ~2 hours of simulated time
struct Clock {
  std::uint64_t ps = 0;
  double frac = 0;
  // advance by dt seconds; false once the horizon is reached
  bool advance(double dt_s, std::uint64_t horizon) {
    double step = frac + dt_s * 1e12;
    if (!(step < static_cast<double>(horizon - ps))) {
      ps = horizon;
      return false;
    }
    double whole = std::floor(step);
    ps += static_cast<std::uint64_t>(whole);
    frac = step - whole;
    return ps < horizon;
  }
};

void push_strict(std::vector<Timestamp>& out, std::uint64_t t) {
  if (!out.empty() && t <= out.back()) t = out.back() + 1;
  out.push_back(t);
}
}  // namespace

std::vector<Timestamp> simulate_emission(const EmitterModel& model, double duration_s, std::uint64_t seed) {
  auto g = make_rng(seed, Purpose::emission);
  const auto horizon = static_cast<std::uint64_t>(std::llround(duration_s * 1e12));
  std::vector<Timestamp> out;
  double kp, kr, k1 = 0, k2 = 1;
  if (auto* p = std::get_if<TwoLevelParams>(&model)) {
    kp = p->kappa_p, kr = p->kappa_r;
  } else {
    const auto& q = std::get<ThreeLevelParams>(model);
    kp = q.kappa_p, kr = q.kappa_r, k1 = q.kappa_1, k2 = q.kappa_2;
  }
  if (!(kp > 0)) return out;
  out.reserve(static_cast<std::size_t>(std::min(1e8, duration_s / (1 / kp + 1 / kr) * 1.05)) + 16);
  std::exponential_distribution<double> wait_g(kp), wait_e(kr + k1), wait_s(k2);
  const double p_rad = kr / (kr + k1);
  Clock c;
  enum { G, E, S } state = G;
  for (;;) {
    if (state == G) {
      if (!c.advance(wait_g(g), horizon)) break;
      state = E;
    } else if (state == E) {
      if (!c.advance(wait_e(g), horizon)) break;
      if (k1 == 0 || uniform01(g) < p_rad) {
        push_strict(out, c.ps);
        state = G;
      } else {
        state = S;
      }
    } else {
      if (!c.advance(wait_s(g), horizon)) break;
      state = G;
    }
  }
  while (!out.empty() && out.back() >= horizon) out.pop_back();
  return out;
}

std::vector<Timestamp> simulate_detected_emission(const EmitterModel& model, double T, double duration_s,
                                                  std::uint64_t seed) {
  if (!(T > 0 && T <= 1)) throw ValidationError("efficiency T must lie in (0, 1]");
  auto g = make_rng(seed, Purpose::emission);
  const auto horizon = static_cast<std::uint64_t>(std::llround(duration_s * 1e12));
  double kp, kr, k1 = 0, k2 = 1;
  if (auto* p = std::get_if<TwoLevelParams>(&model)) {
    kp = p->kappa_p, kr = p->kappa_r;
  } else {
    const auto& q = std::get<ThreeLevelParams>(model);
    kp = q.kappa_p, kr = q.kappa_r, k1 = q.kappa_1, k2 = q.kappa_2;
  }
  std::vector<Timestamp> out;
  const double eta = std::visit([](const auto& p) { return p.eta(); }, model);
  out.reserve(static_cast<std::size_t>(std::min(2e8, eta * T * duration_s * 1.05)) + 16);
  std::geometric_distribution<long long> emissions(T);
  const double p_rad = kr / (kr + k1);
  Clock c;
  for (;;) {
    const long long K = 1 + (T < 1 ? emissions(g) : 0);
    long long J = 0;
    if (k1 > 0) J = std::negative_binomial_distribution<long long>(K, p_rad)(g);
    const long long V = K + J;
    double dt = std::gamma_distribution<double>(static_cast<double>(V), 1 / kp)(g) +
                std::gamma_distribution<double>(static_cast<double>(V), 1 / (kr + k1))(g);
    if (J > 0) dt += std::gamma_distribution<double>(static_cast<double>(J), 1 / k2)(g);
    if (!c.advance(dt, horizon)) break;
    push_strict(out, c.ps);
  }
  while (!out.empty() && out.back() >= horizon) out.pop_back();
  return out;
}

TimeTagStream hbt_split(std::span<const Timestamp> emissions, std::uint64_t duration_ps, std::uint32_t resolution_ps,
                        const DetectionParams& det, std::uint64_t dead_time_ps, std::uint64_t seed) {
  det.validate();
  auto g = make_rng(seed, Purpose::detection);
  std::vector<Timestamp> ch[2];
  const double expect = static_cast<double>(emissions.size()) * det.T / 2 * 1.05 + 16;
  ch[0].reserve(static_cast<std::size_t>(expect));
  ch[1].reserve(static_cast<std::size_t>(expect));
  for (auto t : emissions) {
    if (t >= duration_ps) break;
    if (det.T < 1 && !(uniform01(g) < det.T)) continue;
    const int c = uniform01(g) < 0.5 ? 0 : 1;
    const Timestamp q = t - t % resolution_ps;
    auto& v = ch[c];
    if (dead_time_ps > 0 && !v.empty() && q - v.back() < dead_time_ps) continue;
    v.push_back(q);
  }
  return TimeTagStream(resolution_ps, duration_ps, std::move(ch[0]), std::move(ch[1]));
}

TimeTagStream inject_bunched_noise(const TimeTagStream& s, double rate_hz, double g2_zero, double tau_c_s,
                                   std::uint64_t seed) {
  if (!(rate_hz > 0)) throw ValidationError("noise rate must be positive");
  if (!(g2_zero >= 1)) throw ValidationError("noise g2(0) must be >= 1");
  if (!(tau_c_s > 0)) throw ValidationError("noise correlation time must be positive");
  if (g2_zero == 1) return inject_poisson(s, rate_hz, seed);
  auto g = make_rng(seed, Purpose::noise);
  // two-state modulation: P(on) = 1/g, k_on + k_off = 1/τc, intensity g·rate when on
  const double p_on = 1 / g2_zero;
  const double k_on = p_on / tau_c_s, k_off = (1 - p_on) / tau_c_s;
  const double lambda_on = rate_hz * g2_zero;
  std::exponential_distribution<double> on_len(k_off), off_len(k_on), gap(lambda_on);
  const auto horizon = s.duration_ps();
  const auto res = s.resolution_ps();
  std::vector<Timestamp> noise[2];
  bool on = uniform01(g) < p_on;
  Clock c;
  while (c.ps < horizon) {
    if (!on) {
      c.advance(off_len(g), horizon);
      on = true;
      continue;
    }
    Clock end = c;
    end.advance(on_len(g), horizon);
    for (;;) {
      Clock next = c;
      const bool inside = next.advance(gap(g), horizon);
      if (!inside || next.ps > end.ps || (next.ps == end.ps && next.frac >= end.frac)) break;
      c = next;
      const int ch = uniform01(g) < 0.5 ? 0 : 1;
      noise[ch].push_back(c.ps - c.ps % res);
    }
    c = end;  // memoryless: restart the photon clock at the switch
    on = false;
  }
  std::vector<Timestamp> out[2];
  for (int k = 0; k < 2; ++k) {
    auto in = s.channel(static_cast<Channel>(k));
    out[k].reserve(in.size() + noise[k].size());
    std::merge(in.begin(), in.end(), noise[k].begin(), noise[k].end(), std::back_inserter(out[k]));
  }
  return TimeTagStream(res, horizon, std::move(out[0]), std::move(out[1]));
}

SimulatedDataset simulate_dataset(const EmitterScenario& sc, int threads) {
  sc.validate();
  const auto dur_ps = sc.duration_ps();
  Sampler sampler = sc.sampler;
  if (sampler == Sampler::automatic) {
    const double emissions = sc.emission_rate() * sc.duration_s * sc.n_emitters;
    sampler = (sc.det.T < 0.5 && emissions > 1e6) ? Sampler::collapsed : Sampler::explicit_path;
  }
  const auto n = static_cast<std::size_t>(sc.n_emitters);
  std::vector<std::vector<Timestamp>> per(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto seed = derive_seed(sc.seed, Purpose::emission, i);
    per[i] = sampler == Sampler::collapsed ? simulate_detected_emission(sc.model, sc.det.T, sc.duration_s, seed)
                                           : simulate_emission(sc.model, sc.duration_s, seed);
  });
  std::vector<Timestamp> merged = std::move(per[0]);
  for (std::size_t i = 1; i < n; ++i) {
    std::vector<Timestamp> next;
    next.reserve(merged.size() + per[i].size());
    std::merge(merged.begin(), merged.end(), per[i].begin(), per[i].end(), std::back_inserter(next));
    merged.swap(next);
    std::vector<Timestamp>().swap(per[i]);
  }
  DetectionParams det = sc.det;
  if (sampler == Sampler::collapsed) det.T = 1;  // already thinned
  TimeTagStream s = hbt_split(merged, dur_ps, sc.resolution_ps, det, sc.dead_time_ps,
                              derive_seed(sc.seed, Purpose::detection));
  std::vector<Timestamp>().swap(merged);
  if (sc.noise) {
    const auto nseed = derive_seed(sc.seed, Purpose::noise);
    if (sc.noise->type == NoiseSpec::Type::poisson)
      s = inject_poisson(s, sc.noise->rate_hz, nseed);
    else
      s = inject_bunched_noise(s, sc.noise->rate_hz, sc.noise->g2_zero, sc.noise->tau_c_s, nseed);
  }
  if (sc.survival < 1) s = thin_stream(s, sc.survival, derive_seed(sc.seed, Purpose::survival));
  return {std::move(s), sc, sampler};
}

}  // namespace hbt
