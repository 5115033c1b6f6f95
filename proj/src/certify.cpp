#include "hbtcert/certify.hpp"

#include "hbtcert/digest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace hbt {

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::alpha_span: return "alpha_span";
    case Criterion::gamma_rate: return "gamma_rate";
    case Criterion::gamma_alt: return "gamma_alt";
  }
  return "?";
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::certified: return "certified";
    case Verdict::not_rejected: return "not_rejected";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

// ---------------------------------------------------------------- objectives

double gamma_rate_objective(double K, double w, double w0, double excess) {
  // γ(w0)=1 fixes ρ²·excess = 1 − f2(Kw0); the worst-case profile keeps
  // g̃(w)/w² = g̃(w0)/w0² for w ≤ w0, so the noise term at w is the same constant
  const double c0 = 1 - f2(K, w0);
  const double rho = std::isinf(excess) ? 0.0 : std::sqrt(c0 / excess);
  return (w / w0) * (1 - f2(K, w) - c0) / ((1 + rho) * (1 + rho));
}

double gamma_alt_objective(double K, double w0, double excess) {
  const double x = K * w0;
  // ∂w γ = 0  ⇔  ρ²·excess = 2[1 − e^{−x}(1+x)]/x²
  const double s = x < 1e-4 ? 1 - 2 * x / 3 + x * x / 4 : 2 * (-std::expm1(-x) - x * std::exp(-x)) / (x * x);
  const double rho = std::isinf(excess) ? 0.0 : std::sqrt(s / excess);
  return (1 - f2(K, w0) - s) / ((1 + rho) * (1 + rho));
}

// ---------------------------------------------------------------- optimizer

namespace {

double golden_max(const std::function<double(double)>& f, double lo, double hi, double tol, long long& evals) {
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  evals += 2;
  while (b - a > tol) {
    if (fc >= fd) {
      b = d, d = c, fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
    ++evals;
  }
  // also consider the bracket ends so a boundary maximum is kept
  double best = fc >= fd ? c : d, fbest = std::max(fc, fd);
  for (double e : {lo, hi}) {
    double fe = f(e);
    ++evals;
    if (fe > fbest) best = e, fbest = fe;
  }
  return best;
}

struct Box {
  double a_lo, a_hi, b_lo, b_hi;
};

struct Opt2 {
  double a = 0, b = 0, value = -INFINITY;
  OptimizerTrace trace;
};

std::string trace_json(const OptimizerTrace& t) {
  nlohmann::ordered_json j;
  j["evaluations"] = t.evaluations;
  for (const auto& s : t.starts)
    j["starts"].push_back({{"x0", s.x0}, {"u", s.u}, {"value", s.value}, {"best_x0", s.best_x0},
                           {"best_u", s.best_u}, {"best_value", s.best_value}, {"sweeps", s.sweeps},
                           {"last_step", s.last_step}});
  return j.dump();
}

// grid scan over the box in log coordinates, then coordinate-wise golden
// section from the best cells
Opt2 maximize_2d(const std::function<double(double, double)>& fn, const Box& box, const OptimizerConfig& cfg,
                 const std::function<std::pair<double, double>(double, double)>& report) {
  const int n = cfg.grid;
  const double da = (box.a_hi - box.a_lo) / (n - 1), db = (box.b_hi - box.b_lo) / (n - 1);
  std::vector<double> vals(static_cast<std::size_t>(n) * n);
  parallel_for(static_cast<std::size_t>(n), cfg.threads, [&](std::size_t i) {
    const double a = box.a_lo + da * static_cast<double>(i);
    for (int j = 0; j < n; ++j) vals[i * n + j] = fn(a, box.b_lo + db * j);
  });
  Opt2 out;
  out.trace.evaluations = static_cast<long long>(vals.size());
  std::vector<std::size_t> order(vals.size());
  std::iota(order.begin(), order.end(), 0);
  // max by value, ties toward the smaller cell index (smaller x first)
  std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return vals[p] > vals[q]; });
  const int k = std::min<int>(cfg.top_k, static_cast<int>(order.size()));
  std::vector<OptimizerStart> starts(static_cast<std::size_t>(k));
  std::vector<long long> evals(static_cast<std::size_t>(k), 0);
  parallel_for(static_cast<std::size_t>(k), cfg.threads, [&](std::size_t s) {
    const std::size_t cell = order[s];
    double a = box.a_lo + da * static_cast<double>(cell / n);
    double b = box.b_lo + db * static_cast<double>(cell % n);
    auto& st = starts[s];
    std::tie(st.x0, st.u) = report(a, b);
    st.value = vals[cell];
    double step = INFINITY;
    int sweep = 0;
    while (sweep < cfg.max_sweeps && step >= cfg.rel_tol) {
      const double na = golden_max([&](double x) { return fn(x, b); }, std::max(box.a_lo, a - da),
                                   std::min(box.a_hi, a + da), cfg.rel_tol, evals[s]);
      const double nb = golden_max([&](double y) { return fn(na, y); }, std::max(box.b_lo, b - db),
                                   std::min(box.b_hi, b + db), cfg.rel_tol, evals[s]);
      step = std::max(std::abs(na - a), std::abs(nb - b));
      a = na, b = nb;
      ++sweep;
    }
    st.sweeps = sweep;
    st.last_step = step;
    std::tie(st.best_x0, st.best_u) = report(a, b);
    st.best_value = fn(a, b);
  });
  for (std::size_t s = 0; s < starts.size(); ++s) {
    out.trace.evaluations += evals[s];
    out.trace.starts.push_back(starts[s]);
  }
  std::size_t best = 0;
  for (std::size_t s = 1; s < starts.size(); ++s)
    if (starts[s].best_value > starts[best].best_value) best = s;
  if (starts[best].last_step > 1e-6)
    throw OptimizerError("threshold optimizer did not converge (last step " + std::to_string(starts[best].last_step) +
                             ")",
                         trace_json(out.trace));
  out.value = starts[best].best_value;
  out.a = starts[best].best_x0;
  out.b = starts[best].best_u;
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_grid(const std::vector<double>& w0_grid) {
  if (w0_grid.empty()) throw ValidationError("w0 grid is empty");
  for (double w0 : w0_grid)
    if (!(w0 > 0)) throw ValidationError("w0 values must be positive");
}

}  // namespace

static Opt2 optimize_F(double w0, const OptimizerConfig& cfg) {
  Box box{std::log(cfg.x_min / w0), std::log(cfg.x_max / w0), std::log(cfg.u_min * w0), std::log(cfg.u_max * w0)};
  auto fn = [&](double a, double b) { return gamma_rate_objective(std::exp(a), std::exp(b), w0, cfg.max_excess); };
  auto report = [&](double a, double b) { return std::make_pair(std::exp(a) * w0, std::exp(b) / w0); };
  return maximize_2d(fn, box, cfg, report);
}

static double optimize_E(double w0, const OptimizerConfig& cfg, double* best_x, OptimizerTrace* trace) {
  // one free variable; reuse the 2-d machinery with a dummy axis of one cell
  const double lo = std::log(cfg.x_min / w0), hi = std::log(cfg.x_max / w0);
  const int n = cfg.grid;
  std::vector<double> vals(static_cast<std::size_t>(n));
  const double da = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) vals[static_cast<std::size_t>(i)] = gamma_alt_objective(std::exp(lo + da * i), w0, cfg.max_excess);
  std::vector<std::size_t> order(vals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return vals[p] > vals[q]; });
  long long evals = n;
  double best = -INFINITY, arg = 0;
  for (int s = 0; s < std::min(cfg.top_k, n); ++s) {
    const double a0 = lo + da * static_cast<double>(order[static_cast<std::size_t>(s)]);
    const double a = golden_max([&](double x) { return gamma_alt_objective(std::exp(x), w0, cfg.max_excess); },
                                std::max(lo, a0 - da), std::min(hi, a0 + da), cfg.rel_tol, evals);
    const double v = gamma_alt_objective(std::exp(a), w0, cfg.max_excess);
    if (trace) {
      OptimizerStart st;
      st.x0 = std::exp(a0) * w0;
      st.value = vals[order[static_cast<std::size_t>(s)]];
      st.best_x0 = std::exp(a) * w0;
      st.best_value = v;
      st.sweeps = 1;
      trace->starts.push_back(st);
    }
    if (v > best) best = v, arg = std::exp(a) * w0;
  }
  if (trace) trace->evaluations += evals;
  if (best_x) *best_x = arg;
  return best;
}

double compute_E_threshold(const OptimizerConfig& cfg, double w0) { return optimize_E(w0, cfg, nullptr, nullptr); }

ThresholdReport compute_F_threshold(const std::vector<double>& w0_grid, const OptimizerConfig& cfg) {
  check_grid(w0_grid);
  ThresholdReport r;
  r.w0_grid = w0_grid;
  std::string traces;
  for (std::size_t i = 0; i < w0_grid.size(); ++i) {
    auto o = optimize_F(w0_grid[i], cfg);
    r.per_w0_values.push_back(o.value);
    traces += trace_json(o.trace);
    if (i == 0) {
      r.trace = o.trace;
      r.best_x0 = o.a;
      r.best_u = o.b;
    }
  }
  r.F_value = median(r.per_w0_values);
  for (double v : r.per_w0_values) r.max_deviation = std::max(r.max_deviation, std::abs(v - r.F_value));
  r.trace_digest = sha256_hex(traces);
  return r;
}

ThresholdReport compute_thresholds(const std::vector<double>& w0_grid, const OptimizerConfig& cfg) {
  ThresholdReport r = compute_F_threshold(w0_grid, cfg);
  std::string traces;
  for (std::size_t i = 0; i < w0_grid.size(); ++i) {
    OptimizerTrace t;
    double x = 0;
    r.per_w0_E.push_back(optimize_E(w0_grid[i], cfg, &x, &t));
    if (i == 0) r.best_x_E = x;
    traces += trace_json(t);
  }
  r.E_value = median(r.per_w0_E);
  for (double v : r.per_w0_E) r.max_deviation_E = std::max(r.max_deviation_E, std::abs(v - r.E_value));
  r.trace_digest = sha256_hex(r.trace_digest + traces);
  return r;
}

// ---------------------------------------------------------------- criteria

namespace {

SweepSeries rebuild(const SweepSeries& shape, std::span<const ClickProbabilities> probs) {
  SweepSeries s;
  s.axis = shape.axis;
  s.points = shape.points;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    auto& p = s.points[i];
    p.probs = probs[i];
    p.triple = correlation_triple_or_nan(probs[i]);
    p.defined = std::isfinite(p.triple.gamma);
  }
  return s;
}

struct GammaStat {
  double stat = NAN;
  std::optional<double> w0;
  W0Status status = W0Status::no_crossing;
  double R = NAN, gamma_bar = NAN, w_at_max = NAN;
};

GammaStat gamma_rate_stat(const SweepSeries& s, double F) {
  GammaStat g;
  W0Result w0;
  try {
    w0 = find_w0(s);
  } catch (const ValidationError&) {
    return g;
  }
  g.status = w0.status;
  std::optional<double> w0v = w0.w0_ps;
  if (!w0v && w0.status == W0Status::all_below) {
    // γ ≤ 1 already at the first point: the earliest crossing the data allow
    for (const auto& p : s.points)
      if (p.defined) {
        w0v = static_cast<double>(p.w_ps);
        break;
      }
  }
  if (!w0v) return g;
  g.w0 = w0v;
  g.R = success_rate(s, w0v).mean;
  double best = -INFINITY;
  // F bounds u = w/w0 ≤ 1 only: past w0 a decaying noise profile lets γ climb
  // back above 1 with no bound on the ratio
  for (const auto& p : s.points) {
    if (!p.defined || static_cast<double>(p.w_ps) > *w0v) continue;
    const double v = p.triple.gamma - 1 - F * g.R;
    if (v > best) best = v, g.w_at_max = static_cast<double>(p.w_ps);
  }
  g.stat = best;
  g.gamma_bar = extrema(s).gamma_bar;
  return g;
}

double alpha_span_stat(const SweepSeries& s) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& p : s.points)
    if (p.defined) lo = std::min(lo, p.triple.alpha), hi = std::max(hi, p.triple.alpha);
  return hi >= lo ? hi - lo : NAN;
}

struct AltStat {
  double stat = NAN;
  std::size_t index = 0;
  bool interior = false;
  double p10 = NAN, gamma_bar = NAN, w = NAN;
};

AltStat gamma_alt_stat(const SweepSeries& s, double E) {
  AltStat a;
  std::size_t first = SIZE_MAX, last = 0;
  for (std::size_t i = 0; i < s.points.size(); ++i)
    if (s.points[i].defined) first = std::min(first, i), last = i;
  if (first == SIZE_MAX) return a;
  auto e = extrema(s);
  a.index = e.index_gamma;
  a.interior = a.index != first && a.index != last;
  const auto& p = s.points[a.index];
  a.gamma_bar = e.gamma_bar;
  a.p10 = p.probs.p10;
  a.w = static_cast<double>(p.w_ps);
  a.stat = p.triple.gamma - 1 - E * p.probs.p10;
  return a;
}

void finalize(CertificationResult& r, const std::vector<double>& reps) {
  std::size_t valid = 0;
  for (double v : reps) valid += std::isfinite(v);
  r.supporting.valid_replicates = valid;
  if (reps.empty()) {
    r.verdict = Verdict::inconclusive;
    r.note += (r.note.empty() ? "" : "; ") + std::string("no bootstrap replicates; error of the statistic unknown");
    return;
  }
  if (valid < std::max<std::size_t>(2, reps.size() / 2)) {
    r.verdict = Verdict::inconclusive;
    r.note += (r.note.empty() ? "" : "; ") + std::string("statistic undefined in most bootstrap replicates");
    return;
  }
  r.sigma = finite_stddev(reps);
  const double excess = r.statistic - r.threshold;
  r.margin_sigma = r.sigma > 0 ? excess / r.sigma : (excess > 0 ? INFINITY : excess < 0 ? -INFINITY : 0.0);
  r.verdict = excess > 3 * r.sigma ? Verdict::certified : Verdict::not_rejected;
}

}  // namespace

CertificationResult check_gamma_criterion(const SweepAnalysis& a, const Thresholds& th) {
  if (a.series.axis != Axis::w) throw ValidationError("gamma criterion needs a w sweep");
  CertificationResult r;
  r.criterion = Criterion::gamma_rate;
  r.threshold = 0;
  r.thresholds_version = th.version;
  r.supporting.constant = th.F;
  auto g = gamma_rate_stat(a.series, th.F);
  r.supporting.w0_ps = g.status == W0Status::crossing ? g.w0 : std::nullopt;
  r.supporting.gamma_bar = g.gamma_bar;
  r.supporting.R_w0 = g.R;
  r.supporting.w_at_max = g.w_at_max;
  if (!g.w0) {
    r.verdict = Verdict::inconclusive;
    r.note = std::string("no w0: gamma ") +
             (g.status == W0Status::all_above ? "stays above 1 over the grid" : "has no downward crossing of 1") +
             "; use the gamma-alt criterion (normalisation by P10 at the maximum of gamma)";
    if (extrema(a.series).gamma_bar > 0) r.supporting.gamma_bar = extrema(a.series).gamma_bar;
    return r;
  }
  r.statistic = g.stat;
  if (g.status == W0Status::all_below) r.note = "gamma <= 1 over the whole grid; w0 taken at the smallest w";
  std::vector<double> reps;
  for (const auto& rep : a.replicates) reps.push_back(gamma_rate_stat(rebuild(a.series, rep), th.F).stat);
  finalize(r, reps);
  return r;
}

CertificationResult check_alpha_criterion(const SweepAnalysis& a) {
  if (a.series.axis != Axis::tau) throw ValidationError("alpha criterion needs a tau sweep");
  CertificationResult r;
  r.criterion = Criterion::alpha_span;
  r.threshold = 1;
  r.supporting.constant = 1;
  r.statistic = alpha_span_stat(a.series);
  if (!std::isfinite(r.statistic)) {
    r.note = "alpha undefined at every grid point";
    return r;
  }
  auto e = extrema(a.series);
  r.supporting.gamma_bar = e.gamma_bar;
  std::vector<double> reps;
  for (const auto& rep : a.replicates) reps.push_back(alpha_span_stat(rebuild(a.series, rep)));
  finalize(r, reps);
  return r;
}

CertificationResult check_gamma_alt_criterion(const SweepAnalysis& a, const Thresholds& th) {
  if (a.series.axis != Axis::w) throw ValidationError("gamma-alt criterion needs a w sweep");
  CertificationResult r;
  r.criterion = Criterion::gamma_alt;
  r.threshold = 0;
  r.thresholds_version = th.version;
  r.supporting.constant = th.E;
  auto s = gamma_alt_stat(a.series, th.E);
  r.statistic = s.stat;
  r.supporting.gamma_bar = s.gamma_bar;
  r.supporting.w_at_max = s.w;
  r.supporting.R_w0 = s.p10;
  if (std::isfinite(s.w)) r.supporting.w0_ps = s.w;
  if (!std::isfinite(s.stat)) {
    r.note = "gamma undefined at every grid point";
    return r;
  }
  std::vector<double> reps;
  for (const auto& rep : a.replicates) reps.push_back(gamma_alt_stat(rebuild(a.series, rep), th.E).stat);
  if (!s.interior) {
    // the bound assumes ∂wγ = 0 at w0; a maximum on the grid edge is not one.
    // The statistic can still only fall below the threshold.
    finalize(r, reps);
    if (r.verdict == Verdict::certified) {
      r.verdict = Verdict::inconclusive;
      r.note = "maximum of gamma at the edge of the w grid; extend the grid";
    }
    return r;
  }
  finalize(r, reps);
  return r;
}

}  // namespace hbt

namespace hbt {

std::vector<double> default_w0_grid() {
  std::vector<double> g;
  for (int i = 0; i < 5; ++i) g.push_back(1e-9 * std::pow(10.0, i / 4.0));
  return g;
}

// output of compute_thresholds(default_w0_grid()) with the default config;
// a test recomputes and compares
Thresholds builtin_thresholds() {
  Thresholds t;
  t.F = 0.099835334650094185;
  t.E = 0.27870311291437166;
  t.version = "1";
  t.w0_grid = default_w0_grid();
  t.optimizer_trace_digest = "5ec0bc67a8f253c9eae2be7bb516fb5a7ec3cb43ee5b26de693ae170e9a7c97b";
  return t;
}

}  // namespace hbt
