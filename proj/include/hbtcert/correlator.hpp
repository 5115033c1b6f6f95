#pragma once

#include "hbtcert/timetag.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hbt {

struct CoincidenceCounts {
  std::int64_t w_ps = 0;
  std::int64_t tau_ps = 0;
  std::uint64_t n_bins = 0;
  std::uint64_t n1a = 0, n1b = 0;
  std::uint64_t n11 = 0, n10 = 0, n01 = 0, n00 = 0;

  bool identities_hold() const {
    return n11 + n10 == n1a && n11 + n01 == n1b && n11 + n10 + n01 + n00 == n_bins &&
           n1a <= n_bins && n1b <= n_bins;
  }
  // fills n10/n01/n00 from n_bins, n1a, n1b, n11
  void complete() {
    n10 = n1a - n11;
    n01 = n1b - n11;
    n00 = n_bins - n1a - n1b + n11;
  }
};

struct ClickProbabilities {
  double p1a = 0, p1b = 0;  // raw, per detector
  double p1 = 0, p0 = 0;    // geometric means over detectors
  double p11 = 0, p10 = 0, p00 = 0;
};

struct CorrelationTriple {
  double alpha = 0, beta = 0, gamma = 0;
  double err_alpha = 0, err_beta = 0, err_gamma = 0;
};

// p1 or p0 vanished; the raw probabilities ride along for diagnostics
struct UndefinedCorrelation : Error {
  UndefinedCorrelation(const ClickProbabilities& p)
      : Error("correlation undefined: p1=" + std::to_string(p.p1) + " p0=" + std::to_string(p.p0)),
        probs(p) {}
  ClickProbabilities probs;
};

enum class Axis { w, tau };
const char* axis_name(Axis a);

struct SweepPoint {
  std::int64_t axis_value_ps = 0;
  std::int64_t w_ps = 0;
  std::int64_t tau_ps = 0;
  bool defined = false;  // false when p1 or p0 is zero; triple is NaN then
  CorrelationTriple triple;
  ClickProbabilities probs;
  std::uint64_t n_bins = 0;
};

struct SweepSeries {
  Axis axis = Axis::w;
  std::vector<SweepPoint> points;
};

// instrumentation for the merge-sweep
struct CountingStats {
  std::uint64_t tags_visited = 0;
};

// index range of complete bin pairs; first > last when there are none
struct BinRange {
  std::int64_t first = 0, last = -1;
  std::uint64_t count() const { return last >= first ? static_cast<std::uint64_t>(last - first + 1) : 0; }
};
BinRange bin_range(std::uint64_t duration_ps, std::int64_t w_ps, std::int64_t tau_ps);

CoincidenceCounts count_bin_events(const TimeTagStream& s, std::int64_t w_ps, std::int64_t tau_ps,
                                   CountingStats* stats = nullptr);

// same pass, tallied per time segment: bin pair k goes to segment floor(k*w / segment_ps)
std::vector<CoincidenceCounts> count_bin_events_segmented(const TimeTagStream& s, std::int64_t w_ps,
                                                          std::int64_t tau_ps,
                                                          std::uint64_t segment_ps);

// Every count produced above is checked against the identities (violation:
// std::logic_error). Number of counts checked so far in this process.
std::uint64_t audited_counts();

ClickProbabilities click_probabilities(const CoincidenceCounts& c);
CorrelationTriple correlation_triple(const ClickProbabilities& p);

// NaN triple instead of throwing
CorrelationTriple correlation_triple_or_nan(const ClickProbabilities& p);

struct BootstrapConfig;

struct SweepOptions {
  int threads = 1;
  const BootstrapConfig* bootstrap = nullptr;  // errors stay 0 without it
};

SweepSeries sweep_tau(const TimeTagStream& s, std::int64_t w_ps, std::span<const std::int64_t> tau_grid,
                      const SweepOptions& opt = {});
SweepSeries sweep_w(const TimeTagStream& s, std::int64_t tau_ps, std::span<const std::int64_t> w_grid,
                    const SweepOptions& opt = {});

// logarithmic integer grid, duplicates after rounding removed
std::vector<std::int64_t> log_grid(std::int64_t lo, std::int64_t hi, int points);
std::vector<std::int64_t> linear_grid(std::int64_t lo, std::int64_t hi, int points);
// 60-point default: 4*resolution .. duration/100
std::vector<std::int64_t> default_w_grid(const TimeTagStream& s);

enum class W0Status { crossing, all_above, all_below, no_crossing };
const char* w0_status_name(W0Status s);

struct W0Result {
  std::optional<double> w0_ps;
  W0Status status = W0Status::no_crossing;
};

W0Result find_w0(const SweepSeries& series);

struct Extrema {
  double gamma_bar = std::numeric_limits<double>::quiet_NaN();
  double alpha_bar = std::numeric_limits<double>::quiet_NaN();
  double beta_bar = std::numeric_limits<double>::quiet_NaN();
  std::int64_t argmax_gamma = 0;  // axis value
  std::int64_t argmin_alpha = 0;
  std::int64_t argmin_beta = 0;
  std::size_t index_gamma = 0, index_alpha = 0, index_beta = 0;
};

Extrema extrema(const SweepSeries& series);

// golden-section around the grid maximum of γ over w (τ fixed); result is
// never below the grid maximum
Extrema extrema_refined(const SweepSeries& series, const TimeTagStream& s, int max_evals = 40);

// R = p10 * w0 / w at one point
double success_rate(const ClickProbabilities& p, double w_ps, double w0_ps);

struct SuccessRate {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double spread = 0;  // max - min over the points used; linearity diagnostic
  std::size_t n_points = 0;
  bool linear_regime = false;  // false if no grid w below w0/10 existed
};

// averages R over grid w < w0/10 (falls back to the smallest w)
SuccessRate success_rate(const SweepSeries& w_series, std::optional<double> w0_ps);

}  // namespace hbt
