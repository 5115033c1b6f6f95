#include "hbtcert/bootstrap.hpp"

#include "hbtcert/rng.hpp"

#include <algorithm>
#include <cmath>

namespace hbt {

std::uint64_t effective_block_ps(const BootstrapConfig& cfg, std::uint64_t duration_ps,
                                 std::int64_t largest_w_ps) {
  if (cfg.block_ps > 0) {
    if (cfg.block_ps >= duration_ps)
      throw ValidationError("bootstrap block (" + std::to_string(cfg.block_ps) +
                            " ps) must be shorter than the record (" + std::to_string(duration_ps) + " ps)");
    return cfg.block_ps;
  }
  // 100 x largest w, but keep at least 20 blocks in the record and at most
  // 1024 (segment tables grow with the block count)
  std::uint64_t b = 100 * static_cast<std::uint64_t>(std::max<std::int64_t>(largest_w_ps, 1));
  b = std::max(b, duration_ps / 1024 + 1);
  return std::max<std::uint64_t>(1, std::min(b, duration_ps / 20));
}

ResamplePlan make_resample_plan(std::uint64_t duration_ps, std::uint64_t block_ps, int sub_blocks,
                                int n_resamples, std::uint64_t seed) {
  if (sub_blocks < 1) throw ValidationError("sub_blocks must be >= 1");
  if (n_resamples < 2) throw ValidationError("need at least 2 bootstrap resamples");
  if (block_ps >= duration_ps) throw ValidationError("bootstrap block must be shorter than the record");
  ResamplePlan plan;
  plan.segment_ps = std::max<std::uint64_t>(1, block_ps / static_cast<std::uint64_t>(sub_blocks));
  plan.n_segments = static_cast<std::size_t>((duration_ps + plan.segment_ps - 1) / plan.segment_ps);
  if (plan.n_segments < 2) throw ValidationError("bootstrap needs at least two segments");
  const std::size_t m = static_cast<std::size_t>(sub_blocks);
  const std::size_t n_blocks = (plan.n_segments + m - 1) / m;
  plan.multiplicity.resize(static_cast<std::size_t>(n_resamples));
  for (int r = 0; r < n_resamples; ++r) {
    auto g = make_rng(seed, Purpose::bootstrap, static_cast<std::uint64_t>(r));
    std::uniform_int_distribution<std::size_t> start(0, plan.n_segments - 1);
    auto& mult = plan.multiplicity[static_cast<std::size_t>(r)];
    mult.assign(plan.n_segments, 0);
    for (std::size_t b = 0; b < n_blocks; ++b) {
      std::size_t s = start(g);
      for (std::size_t j = 0; j < m; ++j) ++mult[(s + j) % plan.n_segments];
    }
  }
  return plan;
}

CoincidenceCounts SegmentedSweep::total(std::size_t point) const {
  const auto& v = counts.at(point);
  CoincidenceCounts c;
  if (!v.empty()) c.w_ps = v[0].w_ps, c.tau_ps = v[0].tau_ps;
  for (const auto& x : v) c.n_bins += x.n_bins, c.n1a += x.n1a, c.n1b += x.n1b, c.n11 += x.n11;
  c.complete();
  return c;
}

CoincidenceCounts SegmentedSweep::resampled(std::size_t point, std::span<const std::uint32_t> mult) const {
  const auto& v = counts.at(point);
  CoincidenceCounts c;
  if (!v.empty()) c.w_ps = v[0].w_ps, c.tau_ps = v[0].tau_ps;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const std::uint64_t m = mult[j];
    if (!m) continue;
    c.n_bins += m * v[j].n_bins, c.n1a += m * v[j].n1a, c.n1b += m * v[j].n1b, c.n11 += m * v[j].n11;
  }
  c.complete();
  return c;
}

static void point_params(const SweepSpec& spec, std::size_t i, std::int64_t& w, std::int64_t& tau) {
  if (spec.axis == Axis::w)
    w = spec.values[i], tau = spec.fixed;
  else
    w = spec.fixed, tau = spec.values[i];
}

static void check_spec(const SweepSpec& spec) {
  if (spec.values.empty()) throw ValidationError("sweep grid is empty");
  for (std::size_t i = 1; i < spec.values.size(); ++i)
    if (spec.values[i] <= spec.values[i - 1]) throw ValidationError("sweep grid must be strictly increasing");
}

SegmentedSweep count_segmented_sweep(const TimeTagStream& s, const SweepSpec& spec, std::uint64_t segment_ps,
                                     int threads) {
  check_spec(spec);
  SegmentedSweep out;
  out.spec = spec;
  out.counts.resize(spec.values.size());
  parallel_for(spec.values.size(), threads, [&](std::size_t i) {
    std::int64_t w, tau;
    point_params(spec, i, w, tau);
    out.counts[i] = count_bin_events_segmented(s, w, tau, segment_ps);
  });
  return out;
}

static ClickProbabilities probs_or_nan(const CoincidenceCounts& c) {
  if (c.n_bins == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, nan, nan, nan, nan};
  }
  return click_probabilities(c);
}

double finite_stddev(std::span<const double> v) {
  // shifted by the first finite value so identical inputs give exactly 0
  double shift = 0, sum = 0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      if (n == 0) shift = x;
      sum += x - shift, ++n;
    }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mean = sum / static_cast<double>(n);
  double ss = 0;
  for (double x : v)
    if (std::isfinite(x)) ss += (x - shift - mean) * (x - shift - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

SweepAnalysis analyze_sweep(const TimeTagStream& s, const SweepSpec& spec, const BootstrapConfig* boot,
                            int threads) {
  check_spec(spec);
  const std::size_t np = spec.values.size();
  SweepAnalysis out;
  out.series.axis = spec.axis;
  out.series.points.resize(np);
  std::vector<CoincidenceCounts> totals(np);
  SegmentedSweep seg;
  ResamplePlan plan;
  if (boot) {
    const std::int64_t wmax = spec.axis == Axis::w ? spec.values.back() : spec.fixed;
    out.block_ps = effective_block_ps(*boot, s.duration_ps(), wmax);
    plan = make_resample_plan(s.duration_ps(), out.block_ps, boot->sub_blocks, boot->n_resamples, boot->seed);
    seg = count_segmented_sweep(s, spec, plan.segment_ps, threads);
    for (std::size_t i = 0; i < np; ++i) totals[i] = seg.total(i);
  } else {
    parallel_for(np, threads, [&](std::size_t i) {
      std::int64_t w, tau;
      point_params(spec, i, w, tau);
      totals[i] = count_bin_events(s, w, tau);
    });
  }
  for (std::size_t i = 0; i < np; ++i) {
    auto& p = out.series.points[i];
    point_params(spec, i, p.w_ps, p.tau_ps);
    p.axis_value_ps = spec.values[i];
    p.n_bins = totals[i].n_bins;
    p.probs = click_probabilities(totals[i]);
    p.triple = correlation_triple_or_nan(p.probs);
    p.defined = std::isfinite(p.triple.alpha);
  }
  if (!boot) return out;

  const std::size_t nr = plan.multiplicity.size();
  out.replicates.assign(nr, std::vector<ClickProbabilities>(np));
  parallel_for(nr, threads, [&](std::size_t r) {
    for (std::size_t i = 0; i < np; ++i) out.replicates[r][i] = probs_or_nan(seg.resampled(i, plan.multiplicity[r]));
  });
  std::vector<double> a(nr), b(nr), g(nr);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t r = 0; r < nr; ++r) {
      auto t = correlation_triple_or_nan(out.replicates[r][i]);
      a[r] = t.alpha, b[r] = t.beta, g[r] = t.gamma;
    }
    auto& t = out.series.points[i].triple;
    t.err_alpha = finite_stddev(a);
    t.err_beta = finite_stddev(b);
    t.err_gamma = finite_stddev(g);
  }
  return out;
}

std::vector<double> bootstrap_errors(const SweepAnalysis& a, const Estimator& est) {
  if (a.replicates.empty()) throw ValidationError("bootstrap_errors: analysis has no replicates");
  std::vector<std::vector<double>> vals;
  vals.reserve(a.replicates.size());
  for (const auto& rep : a.replicates) vals.push_back(est(rep));
  const std::size_t k = vals.front().size();
  std::vector<double> out(k), col(vals.size());
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t r = 0; r < vals.size(); ++r) col[r] = vals[r].at(j);
    out[j] = finite_stddev(col);
  }
  return out;
}

std::vector<double> bootstrap_errors(const TimeTagStream& s, const SweepSpec& spec, const Estimator& est,
                                     const BootstrapConfig& cfg, int threads) {
  return bootstrap_errors(analyze_sweep(s, spec, &cfg, threads), est);
}

}  // namespace hbt
