#pragma once

#include "hbtcert/bootstrap.hpp"
#include "hbtcert/models.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace hbt {

struct OptimizerConfig {
  int grid = 200;
  double x_min = 1e-3, x_max = 1e3;  // K·w0
  double u_min = 1e-3, u_max = 1;    // w/w0
  int top_k = 5;
  double rel_tol = 1e-8;
  int max_sweeps = 200;
  // bound on g̃(w0)/w0² − 1; infinity is the unrestricted family
  double max_excess = std::numeric_limits<double>::infinity();
  int threads = 1;
};

struct OptimizerStart {
  double x0 = 0, u = 0;  // grid cell
  double value = 0;
  double best_x0 = 0, best_u = 0, best_value = 0;
  int sweeps = 0;
  double last_step = 0;
};

struct OptimizerTrace {
  long long evaluations = 0;
  std::vector<OptimizerStart> starts;
};

struct ThresholdReport {
  double F_value = 0;
  double E_value = 0;
  std::vector<double> w0_grid;  // s
  std::vector<double> per_w0_values;
  std::vector<double> per_w0_E;
  double max_deviation = 0;    // F: max |value − median|
  double max_deviation_E = 0;
  double best_x0 = 0, best_u = 0;  // dimensionless location of the F optimum
  double best_x_E = 0;
  OptimizerTrace trace;          // of the first w0
  std::string trace_digest;      // sha256 of the serialized traces
};

struct OptimizerError : Error {
  OptimizerError(const std::string& msg, std::string trace) : Error(msg), trace(std::move(trace)) {}
  std::string trace;
};

// (γ(w)−1)/R for the two-level + constant-profile noise family, noise level
// fixed by γ(w0)=1. excess = g̃(w0)/w0² − 1 (inf allowed). Rates/times in any
// consistent units.
double gamma_rate_objective(double K, double w, double w0, double excess);

// (γ(w0)−1)/P10(w0) with w0 at the maximum of γ (stationarity fixes n̄)
double gamma_alt_objective(double K, double w0, double excess);

ThresholdReport compute_F_threshold(const std::vector<double>& w0_grid, const OptimizerConfig& cfg = {});
double compute_E_threshold(const OptimizerConfig& cfg = {}, double w0 = 1.0);
// both, plus per-w0 E values
ThresholdReport compute_thresholds(const std::vector<double>& w0_grid, const OptimizerConfig& cfg = {});

struct Thresholds {
  double F = 0;
  double E = 0;
  std::string version;
  std::vector<double> w0_grid;
  std::string optimizer_trace_digest;
};

// one decade, 1..10 ns, five log-spaced points (seconds)
std::vector<double> default_w0_grid();

// constants shipped with the library (from compute_thresholds on the default grid)
Thresholds builtin_thresholds();

enum class Criterion { alpha_span, gamma_rate, gamma_alt };
enum class Verdict { certified, not_rejected, inconclusive };
const char* criterion_name(Criterion c);
const char* verdict_name(Verdict v);

struct CertificationResult {
  Criterion criterion = Criterion::gamma_rate;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double threshold = 0;
  double sigma = std::numeric_limits<double>::quiet_NaN();  // bootstrap sd of the statistic
  double margin_sigma = std::numeric_limits<double>::quiet_NaN();
  Verdict verdict = Verdict::inconclusive;
  struct {
    std::optional<double> w0_ps;
    double gamma_bar = std::numeric_limits<double>::quiet_NaN();
    double R_w0 = std::numeric_limits<double>::quiet_NaN();
    double w_at_max = std::numeric_limits<double>::quiet_NaN();
    double constant = std::numeric_limits<double>::quiet_NaN();  // F or E used
    std::size_t valid_replicates = 0;
  } supporting;
  std::string note;
  std::string thresholds_version;
};

// statistic = max over w ≤ w0 of [γ(w) − 1 − F·R_w0]
CertificationResult check_gamma_criterion(const SweepAnalysis& w_sweep, const Thresholds& th);
// statistic = sup_τ α − inf_τ α, threshold 1
CertificationResult check_alpha_criterion(const SweepAnalysis& tau_sweep);
// statistic = γ(w0) − 1 − E·P10(w0), w0 the (interior) maximum of γ
CertificationResult check_gamma_alt_criterion(const SweepAnalysis& w_sweep, const Thresholds& th);

}  // namespace hbt
