#pragma once

#include "hbtcert/models.hpp"
#include "hbtcert/timetag.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hbt {

using EmitterModel = std::variant<TwoLevelParams, ThreeLevelParams>;

struct NoiseSpec {
  enum class Type { poisson, exp_bunched };
  Type type = Type::poisson;
  double rate_hz = 0;  // detected noise clicks per second, both channels together
  double g2_zero = 1;
  double tau_c_s = 0;
};

enum class Sampler { automatic, explicit_path, collapsed };

struct EmitterScenario {
  EmitterModel model = TwoLevelParams{};
  std::optional<NoiseSpec> noise;
  DetectionParams det;
  int n_emitters = 1;
  double survival = 1;
  double duration_s = 0;
  std::uint64_t dead_time_ps = 0;
  std::uint64_t seed = 0;
  std::uint32_t resolution_ps = 4;
  Sampler sampler = Sampler::automatic;

  // throws ValidationError naming every offending field
  void validate() const;
  std::uint64_t duration_ps() const;
  double emission_rate() const;  // η of one emitter
};

// Seed splitting rule used by simulate_dataset (seed = scenario seed):
//   emitter i          derive_seed(seed, Purpose::emission, i)
//   detection/routing  derive_seed(seed, Purpose::detection)
//   noise              derive_seed(seed, Purpose::noise)
//   survival thinning  derive_seed(seed, Purpose::survival)

// Gillespie run from the ground state; every radiative e→g jump is an emission
std::vector<Timestamp> simulate_emission(const EmitterModel& model, double duration_s, std::uint64_t seed);

// Emissions already thinned by efficiency T, drawn in one step per detected
// photon: the number of emissions up to the next detected one is geometric,
// shelving excursions among them negative binomial, and the elapsed time a sum
// of gamma variates. Same law as simulate_emission followed by Bernoulli(T).
std::vector<Timestamp> simulate_detected_emission(const EmitterModel& model, double T, double duration_s,
                                                  std::uint64_t seed);

// detection with probability T, 50/50 routing, per-channel dead time,
// timestamps snapped down to the resolution grid
TimeTagStream hbt_split(std::span<const Timestamp> emissions, std::uint64_t duration_ps, std::uint32_t resolution_ps,
                        const DetectionParams& det, std::uint64_t dead_time_ps, std::uint64_t seed);

// on/off Markov-modulated Poisson noise with g2(τ) = 1 + (g−1) e^{−τ/τc}:
// on-fraction 1/g, switching rates sum to 1/τc, on-intensity g·rate
TimeTagStream inject_bunched_noise(const TimeTagStream& s, double rate_hz, double g2_zero, double tau_c_s,
                                   std::uint64_t seed);

struct SimulatedDataset {
  TimeTagStream stream;
  EmitterScenario scenario;
  Sampler sampler_used = Sampler::explicit_path;
};

SimulatedDataset simulate_dataset(const EmitterScenario& scenario, int threads = 1);

const char* sampler_name(Sampler s);

}  // namespace hbt
