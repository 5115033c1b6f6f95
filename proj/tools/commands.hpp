#pragma once

#include "hbtcert/bootstrap.hpp"
#include "hbtcert/certify.hpp"
#include "hbtcert/manifest.hpp"
#include "hbtcert/simulator.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hbt::cli {

struct GridFlags {
  std::int64_t w_min = 0, w_max = 0;  // 0: data-driven default
  int w_points = 60;
  std::int64_t tau_min = -100000, tau_max = 100000;
  int tau_points = 201;
  std::int64_t tau_w = 1000;  // bin of the τ sweep
  std::int64_t tau = 0;       // delay of the w sweep
};

struct RunFlags {
  int bootstrap = 200;
  std::uint64_t block_ps = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string format = "csv";
};

std::vector<std::int64_t> w_grid(const TimeTagStream& s, const GridFlags& g);
std::vector<std::int64_t> tau_grid(const GridFlags& g);
std::optional<BootstrapConfig> bootstrap_config(const RunFlags& f);

// each returns the files written (manifest excluded)
std::vector<std::filesystem::path> cmd_analyze(const std::filesystem::path& input, const GridFlags& g,
                                               const RunFlags& f, const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> cmd_simulate(const std::filesystem::path& scenario,
                                                const std::filesystem::path& out, const RunFlags& f,
                                                std::optional<std::uint64_t> seed_override);
// verdict lines go to stdout
std::vector<std::filesystem::path> cmd_certify(const std::filesystem::path& input, const std::string& criterion,
                                               const GridFlags& g, const RunFlags& f,
                                               const std::optional<std::filesystem::path>& thresholds_file,
                                               const std::filesystem::path& out, std::string* thresholds_version);
std::vector<std::filesystem::path> cmd_thresholds(const std::vector<double>& w0_grid, const OptimizerConfig& cfg,
                                                  const std::string& version, const std::filesystem::path& out);

}  // namespace hbt::cli
