#include "hbtcert/correlator.hpp"

#include "hbtcert/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <cmath>

namespace hbt {

const char* axis_name(Axis a) { return a == Axis::w ? "w" : "tau"; }

const char* w0_status_name(W0Status s) {
  switch (s) {
    case W0Status::crossing: return "crossing";
    case W0Status::all_above: return "all_above";
    case W0Status::all_below: return "all_below";
    case W0Status::no_crossing: return "no_crossing";
  }
  return "?";
}

static std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}
static std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

BinRange bin_range(std::uint64_t duration_ps, std::int64_t w, std::int64_t tau) {
  const auto d = static_cast<std::int64_t>(duration_ps);
  BinRange r;
  // A bin [kw, kw+w) and B bin [kw+τ, kw+w+τ) both inside [0, d)
  r.first = std::max<std::int64_t>(0, ceil_div(-tau, w));
  r.last = std::min(floor_div(d, w), floor_div(d - tau, w)) - 1;
  return r;
}

static void check_args(const TimeTagStream& s, std::int64_t w, std::int64_t tau) {
  if (w < static_cast<std::int64_t>(s.resolution_ps()))
    throw ValidationError("bin size w=" + std::to_string(w) + " ps below resolution " +
                          std::to_string(s.resolution_ps()) + " ps");
  const auto d = static_cast<std::int64_t>(s.duration_ps());
  if (!(std::abs(tau) < d - w))
    throw ValidationError("|tau|=" + std::to_string(std::abs(tau)) + " ps must be < duration - w");
}

// Single merge-sweep over both channels. The sink sees each distinct A-bin and
// B-bin with a click, in increasing pair index, as a(k), b(k) or both(k).
template <class Sink>
static void sweep_core(const TimeTagStream& s, std::int64_t w, std::int64_t tau, BinRange r, Sink& sink,
                       CountingStats* stats) {
  if (r.count() == 0) return;
  auto A = s.channel_a();
  auto B = s.channel_b();
  const auto uw = static_cast<std::uint64_t>(w);
  const auto n = r.count();
  const auto a_lo = static_cast<std::uint64_t>(r.first) * uw;
  const auto a_hi = a_lo + n * uw;
  const auto b_lo = static_cast<std::uint64_t>(r.first * w + tau);
  const auto b_hi = b_lo + n * uw;
  auto ia = std::lower_bound(A.begin(), A.end(), a_lo);
  auto ea = std::lower_bound(ia, A.end(), a_hi);
  auto ib = std::lower_bound(B.begin(), B.end(), b_lo);
  auto eb = std::lower_bound(ib, B.end(), b_hi);

  constexpr std::int64_t kNone = INT64_MAX;
  std::uint64_t visited = 0;
  std::int64_t ka = kNone, kb = kNone;
  auto next_a = [&] {
    if (ia == ea) { ka = kNone; return; }
    const std::uint64_t off = *ia - a_lo;
    const std::uint64_t k = off / uw;
    const std::uint64_t end = a_lo + (k + 1) * uw;
    ++ia, ++visited;
    while (ia != ea && *ia < end) ++ia, ++visited;
    ka = r.first + static_cast<std::int64_t>(k);
  };
  auto next_b = [&] {
    if (ib == eb) { kb = kNone; return; }
    const std::uint64_t off = *ib - b_lo;
    const std::uint64_t k = off / uw;
    const std::uint64_t end = b_lo + (k + 1) * uw;
    ++ib, ++visited;
    while (ib != eb && *ib < end) ++ib, ++visited;
    kb = r.first + static_cast<std::int64_t>(k);
  };
  next_a();
  next_b();
  while (ka != kNone || kb != kNone) {
    if (ka == kb) {
      sink.both(ka);
      next_a();
      next_b();
    } else if (ka < kb) {
      sink.a(ka);
      next_a();
    } else {
      sink.b(kb);
      next_b();
    }
  }
  if (stats) stats->tags_visited += visited;
}

static std::atomic<std::uint64_t> g_audited{0};

static void audit(const CoincidenceCounts& c) {
  if (!c.identities_hold())
    throw std::logic_error("coincidence count identities violated at w=" + std::to_string(c.w_ps) +
                           " tau=" + std::to_string(c.tau_ps));
  g_audited.fetch_add(1, std::memory_order_relaxed);
}

std::uint64_t audited_counts() { return g_audited.load(); }

namespace {
struct TotalSink {
  std::uint64_t n1a = 0, n1b = 0, n11 = 0;
  void a(std::int64_t) { ++n1a; }
  void b(std::int64_t) { ++n1b; }
  void both(std::int64_t) { ++n1a, ++n1b, ++n11; }
};

struct SegmentSink {
  std::vector<CoincidenceCounts>& out;
  std::int64_t w;
  std::int64_t seg_ps;
  std::size_t cur = 0;
  std::int64_t cur_end_k = 0;  // first pair index of segment cur+1

  SegmentSink(std::vector<CoincidenceCounts>& o, std::int64_t w_, std::int64_t seg)
      : out(o), w(w_), seg_ps(seg) {
    cur_end_k = ceil_div(seg_ps, w);
  }
  CoincidenceCounts& at(std::int64_t k) {
    if (k >= cur_end_k) {
      cur = static_cast<std::size_t>(floor_div(k * w, seg_ps));
      cur_end_k = ceil_div(static_cast<std::int64_t>(cur + 1) * seg_ps, w);
    }
    return out[cur];
  }
  void a(std::int64_t k) { ++at(k).n1a; }
  void b(std::int64_t k) { ++at(k).n1b; }
  void both(std::int64_t k) {
    auto& c = at(k);
    ++c.n1a, ++c.n1b, ++c.n11;
  }
};
}  // namespace

CoincidenceCounts count_bin_events(const TimeTagStream& s, std::int64_t w, std::int64_t tau,
                                   CountingStats* stats) {
  check_args(s, w, tau);
  auto r = bin_range(s.duration_ps(), w, tau);
  if (r.count() == 0) throw ValidationError("no complete bin pair for this (w, tau)");
  TotalSink sink;
  sweep_core(s, w, tau, r, sink, stats);
  CoincidenceCounts c;
  c.w_ps = w;
  c.tau_ps = tau;
  c.n_bins = r.count();
  c.n1a = sink.n1a;
  c.n1b = sink.n1b;
  c.n11 = sink.n11;
  c.complete();
  audit(c);
  return c;
}

std::vector<CoincidenceCounts> count_bin_events_segmented(const TimeTagStream& s, std::int64_t w,
                                                          std::int64_t tau, std::uint64_t segment_ps) {
  check_args(s, w, tau);
  if (segment_ps == 0) throw ValidationError("segment length must be positive");
  auto r = bin_range(s.duration_ps(), w, tau);
  if (r.count() == 0) throw ValidationError("no complete bin pair for this (w, tau)");
  const auto seg = static_cast<std::int64_t>(segment_ps);
  const auto nseg = static_cast<std::size_t>(ceil_div(static_cast<std::int64_t>(s.duration_ps()), seg));
  std::vector<CoincidenceCounts> out(nseg);
  for (std::size_t j = 0; j < nseg; ++j) {
    auto& c = out[j];
    c.w_ps = w;
    c.tau_ps = tau;
    std::int64_t k0 = std::max(r.first, ceil_div(static_cast<std::int64_t>(j) * seg, w));
    std::int64_t k1 = std::min(r.last, ceil_div(static_cast<std::int64_t>(j + 1) * seg, w) - 1);
    c.n_bins = k1 >= k0 ? static_cast<std::uint64_t>(k1 - k0 + 1) : 0;
  }
  SegmentSink sink(out, w, seg);
  sweep_core(s, w, tau, r, sink, nullptr);
  for (auto& c : out) {
    c.complete();
    audit(c);
  }
  return out;
}

ClickProbabilities click_probabilities(const CoincidenceCounts& c) {
  if (c.n_bins == 0) throw ValidationError("click_probabilities: n_bins = 0");
  const double n = static_cast<double>(c.n_bins);
  ClickProbabilities p;
  p.p1a = static_cast<double>(c.n1a) / n;
  p.p1b = static_cast<double>(c.n1b) / n;
  const double p0a = static_cast<double>(c.n_bins - c.n1a) / n;
  const double p0b = static_cast<double>(c.n_bins - c.n1b) / n;
  p.p1 = std::sqrt(p.p1a * p.p1b);
  p.p0 = std::sqrt(p0a * p0b);
  p.p11 = static_cast<double>(c.n11) / n;
  p.p00 = static_cast<double>(c.n00) / n;
  p.p10 = std::sqrt((static_cast<double>(c.n10) / n) * (static_cast<double>(c.n01) / n));
  return p;
}

CorrelationTriple correlation_triple(const ClickProbabilities& p) {
  if (!(p.p1 > 0) || !(p.p0 > 0)) throw UndefinedCorrelation(p);
  CorrelationTriple t;
  t.alpha = p.p11 / (p.p1 * p.p1);
  t.beta = p.p00 / (p.p0 * p.p0);
  t.gamma = p.p10 / (p.p0 * p.p1);
  return t;
}

CorrelationTriple correlation_triple_or_nan(const ClickProbabilities& p) {
  if (!(p.p1 > 0) || !(p.p0 > 0)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, 0, 0, 0};
  }
  return correlation_triple(p);
}

SweepSeries sweep_tau(const TimeTagStream& s, std::int64_t w, std::span<const std::int64_t> taus,
                      const SweepOptions& opt) {
  SweepSpec spec{Axis::tau, {taus.begin(), taus.end()}, w};
  return analyze_sweep(s, spec, opt.bootstrap, opt.threads).series;
}

SweepSeries sweep_w(const TimeTagStream& s, std::int64_t tau, std::span<const std::int64_t> ws,
                    const SweepOptions& opt) {
  SweepSpec spec{Axis::w, {ws.begin(), ws.end()}, tau};
  return analyze_sweep(s, spec, opt.bootstrap, opt.threads).series;
}

std::vector<std::int64_t> log_grid(std::int64_t lo, std::int64_t hi, int points) {
  if (lo <= 0 || hi < lo || points < 1) throw ValidationError("log_grid: need 0 < lo <= hi, points >= 1");
  std::vector<std::int64_t> g;
  if (points == 1 || lo == hi) return {lo};
  const double a = std::log(static_cast<double>(lo)), b = std::log(static_cast<double>(hi));
  for (int i = 0; i < points; ++i) {
    auto v = static_cast<std::int64_t>(std::llround(std::exp(a + (b - a) * i / (points - 1))));
    v = std::clamp(v, lo, hi);
    if (g.empty() || v > g.back()) g.push_back(v);
  }
  return g;
}

std::vector<std::int64_t> linear_grid(std::int64_t lo, std::int64_t hi, int points) {
  if (hi < lo || points < 1) throw ValidationError("linear_grid: need lo <= hi, points >= 1");
  std::vector<std::int64_t> g;
  if (points == 1 || lo == hi) return {lo};
  for (int i = 0; i < points; ++i) {
    auto v = lo + static_cast<std::int64_t>(std::llround(static_cast<double>(hi - lo) * i / (points - 1)));
    if (g.empty() || v > g.back()) g.push_back(v);
  }
  return g;
}

std::vector<std::int64_t> default_w_grid(const TimeTagStream& s) {
  const auto lo = 4 * static_cast<std::int64_t>(s.resolution_ps());
  const auto hi = static_cast<std::int64_t>(s.duration_ps() / 100);
  if (hi < lo) throw ValidationError("record too short for the default w grid");
  return log_grid(lo, hi, 60);
}

W0Result find_w0(const SweepSeries& series) {
  if (series.axis != Axis::w) throw ValidationError("find_w0 needs a w sweep");
  std::vector<const SweepPoint*> pts;
  for (const auto& p : series.points)
    if (p.defined && std::isfinite(p.triple.gamma)) pts.push_back(&p);
  if (pts.size() < 2) throw ValidationError("find_w0 needs at least two defined points");
  W0Result r;
  bool any_above = false, any_below = false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double g = pts[i]->triple.gamma;
    (g > 1 ? any_above : any_below) = true;
    if (i + 1 < pts.size() && g > 1 && pts[i + 1]->triple.gamma <= 1) {
      const double g1 = pts[i + 1]->triple.gamma;
      const double l0 = std::log(static_cast<double>(pts[i]->w_ps));
      const double l1 = std::log(static_cast<double>(pts[i + 1]->w_ps));
      r.w0_ps = std::exp(l0 + (g - 1) / (g - g1) * (l1 - l0));
      r.status = W0Status::crossing;
      return r;
    }
  }
  r.status = !any_below ? W0Status::all_above : !any_above ? W0Status::all_below : W0Status::no_crossing;
  return r;
}

Extrema extrema(const SweepSeries& series) {
  if (series.points.empty()) throw ValidationError("extrema: empty series");
  Extrema e;
  bool first = true;
  for (std::size_t i = 0; i < series.points.size(); ++i) {
    const auto& p = series.points[i];
    if (!p.defined) continue;
    const auto& t = p.triple;
    // strict comparisons: ties stay at the smaller axis value
    if (first || t.gamma > e.gamma_bar) e.gamma_bar = t.gamma, e.argmax_gamma = p.axis_value_ps, e.index_gamma = i;
    if (first || t.alpha < e.alpha_bar) e.alpha_bar = t.alpha, e.argmin_alpha = p.axis_value_ps, e.index_alpha = i;
    if (first || t.beta < e.beta_bar) e.beta_bar = t.beta, e.argmin_beta = p.axis_value_ps, e.index_beta = i;
    first = false;
  }
  return e;
}

Extrema extrema_refined(const SweepSeries& series, const TimeTagStream& s, int max_evals) {
  Extrema e = extrema(series);
  if (series.axis != Axis::w || series.points.size() < 2) return e;
  const std::size_t i = e.index_gamma;
  const std::int64_t tau = series.points[i].tau_ps;
  std::int64_t lo = series.points[i == 0 ? 0 : i - 1].w_ps;
  std::int64_t hi = series.points[std::min(i + 1, series.points.size() - 1)].w_ps;
  auto gamma_at = [&](std::int64_t w) {
    try {
      return correlation_triple(click_probabilities(count_bin_events(s, w, tau))).gamma;
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  const double phi = (std::sqrt(5.0) - 1) / 2;
  double a = static_cast<double>(lo), b = static_cast<double>(hi);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  auto wc = std::llround(c), wd = std::llround(d);
  double fc = gamma_at(wc), fd = gamma_at(wd);
  for (int it = 0; it < max_evals && b - a > 1; ++it) {
    if (fc >= fd) {
      b = d, d = c, fd = fc, wd = wc;
      c = b - phi * (b - a);
      wc = std::llround(c);
      fc = gamma_at(wc);
    } else {
      a = c, c = d, fc = fd, wc = wd;
      d = a + phi * (b - a);
      wd = std::llround(d);
      fd = gamma_at(wd);
    }
  }
  const bool use_c = fc >= fd;
  const double best = use_c ? fc : fd;
  if (best > e.gamma_bar) {
    e.gamma_bar = best;
    e.argmax_gamma = use_c ? wc : wd;
  }
  return e;
}

double success_rate(const ClickProbabilities& p, double w_ps, double w0_ps) {
  if (!(w0_ps > 0) || !(w_ps > 0)) throw ValidationError("success_rate: w and w0 must be positive");
  return p.p10 * w0_ps / w_ps;
}

SuccessRate success_rate(const SweepSeries& series, std::optional<double> w0_ps) {
  if (!w0_ps)
    throw ValidationError(
        "success rate needs w0 (gamma never crosses 1); use the gamma-alt criterion, which "
        "normalizes by P10 at the maximum of gamma instead");
  if (series.axis != Axis::w) throw ValidationError("success_rate needs a w sweep");
  SuccessRate r;
  double lo = INFINITY, hi = -INFINITY, sum = 0;
  auto take = [&](const SweepPoint& p) {
    const double v = success_rate(p.probs, static_cast<double>(p.w_ps), *w0_ps);
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++r.n_points;
  };
  for (const auto& p : series.points)
    if (static_cast<double>(p.w_ps) < *w0_ps / 10) take(p);
  r.linear_regime = r.n_points > 0;
  if (!r.linear_regime && !series.points.empty()) take(series.points.front());
  if (r.n_points == 0) return r;
  r.mean = sum / static_cast<double>(r.n_points);
  r.spread = hi - lo;
  return r;
}

}  // namespace hbt
