#pragma once

#include "hbtcert/correlator.hpp"

#include <functional>

namespace hbt {

// Circular block bootstrap over a fixed time partition. The record is cut into
// sub-blocks of block_ps / sub_blocks; a replicate concatenates randomly placed
// runs of `sub_blocks` consecutive sub-blocks (wrapping at the end). Counts are
// additive, so a replicate is just a multiplicity vector over sub-blocks and is
// shared by every grid point.
struct BootstrapConfig {
  int n_resamples = 200;
  std::uint64_t block_ps = 0;  // 0: 100 x largest grid w, within [duration/1024, duration/20]
  std::uint64_t seed = 0;
  int sub_blocks = 4;
};

std::uint64_t effective_block_ps(const BootstrapConfig& cfg, std::uint64_t duration_ps,
                                 std::int64_t largest_w_ps);

struct ResamplePlan {
  std::size_t n_segments = 0;
  std::uint64_t segment_ps = 0;
  std::vector<std::vector<std::uint32_t>> multiplicity;  // [replicate][segment]
};

ResamplePlan make_resample_plan(std::uint64_t duration_ps, std::uint64_t block_ps, int sub_blocks,
                                int n_resamples, std::uint64_t seed);

struct SweepSpec {
  Axis axis = Axis::w;
  std::vector<std::int64_t> values;  // w grid, or τ grid
  std::int64_t fixed = 0;            // τ for a w sweep, w for a τ sweep
};

// counts per grid point, per segment
struct SegmentedSweep {
  SweepSpec spec;
  std::vector<std::vector<CoincidenceCounts>> counts;  // [point][segment]

  CoincidenceCounts total(std::size_t point) const;
  CoincidenceCounts resampled(std::size_t point, std::span<const std::uint32_t> mult) const;
};

SegmentedSweep count_segmented_sweep(const TimeTagStream& s, const SweepSpec& spec,
                                     std::uint64_t segment_ps, int threads = 1);

struct SweepAnalysis {
  SweepSeries series;  // point estimates from the full record, errors filled
  // click probabilities of every point in every replicate: [replicate][point]
  std::vector<std::vector<ClickProbabilities>> replicates;
  std::uint64_t block_ps = 0;
};

SweepAnalysis analyze_sweep(const TimeTagStream& s, const SweepSpec& spec, const BootstrapConfig* boot,
                            int threads = 1);

// estimator over the probabilities of all grid points -> any number of outputs
using Estimator = std::function<std::vector<double>(std::span<const ClickProbabilities>)>;

// standard deviation of each estimator output across replicates (NaN outputs skipped)
std::vector<double> bootstrap_errors(const SweepAnalysis& a, const Estimator& est);
std::vector<double> bootstrap_errors(const TimeTagStream& s, const SweepSpec& spec, const Estimator& est,
                                     const BootstrapConfig& cfg, int threads = 1);

// sample standard deviation over finite entries; NaN with fewer than two
double finite_stddev(std::span<const double> v);

}  // namespace hbt
