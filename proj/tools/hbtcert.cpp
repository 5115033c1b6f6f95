// hbtcert: analyze / simulate / certify / thresholds
#include "commands.hpp"

#include "hbtcert/digest.hpp"
#include "hbtcert/serialize.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

using namespace hbt;
using namespace hbt::cli;
namespace fs = std::filesystem;

namespace {

void add_grid_flags(CLI::App* sub, GridFlags& g) {
  sub->add_option("--w-min", g.w_min, "smallest bin width, ps (default 4 x resolution)");
  sub->add_option("--w-max", g.w_max, "largest bin width, ps (default duration/100)");
  sub->add_option("--w-points", g.w_points, "points of the log w grid")->check(CLI::PositiveNumber);
  sub->add_option("--tau-min", g.tau_min, "τ sweep start, ps");
  sub->add_option("--tau-max", g.tau_max, "τ sweep end, ps");
  sub->add_option("--tau-points", g.tau_points, "points of the linear τ grid")->check(CLI::PositiveNumber);
  sub->add_option("--tau-w", g.tau_w, "bin width of the τ sweep, ps")->check(CLI::PositiveNumber);
  sub->add_option("--tau", g.tau, "delay of the w sweep, ps");
}

void add_run_flags(CLI::App* sub, RunFlags& f, bool bootstrap) {
  if (bootstrap) {
    sub->add_option("--bootstrap", f.bootstrap, "bootstrap resamples (0 disables)")->check(CLI::NonNegativeNumber);
    sub->add_option("--block-ps", f.block_ps, "bootstrap block length, ps (0: automatic)");
  }
  sub->add_option("--seed", f.seed, "seed for all randomness");
  sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
}

std::vector<std::pair<std::string, std::string>> parameters_of(const CLI::App* sub) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(sub->config_to_str(true, false));
  for (std::string line; std::getline(in, line);) {
    auto eq = line.find('=');
    if (eq == std::string::npos || line[0] == '[' || line[0] == '#') continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (value.empty()) continue;  // not given, no default
    out.emplace_back(trim(line.substr(0, eq)), value);
  }
  return out;
}

void write_manifest(const fs::path& path, RunManifest m, const std::vector<fs::path>& outputs) {
  m.tool_version = tool_version();
  for (const auto& p : outputs) m.outputs.emplace_back(p.string(), sha256_file(p));
  write_text(path, manifest_to_json(m));
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  auto q = p;
  q.replace_extension(suffix);
  return q;
}

int run(std::vector<std::string> args) {
  CLI::App app{"Threefold click/no-click HBT correlations and model-rejection certification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  GridFlags grid;
  RunFlags run;
  std::string input, out, scenario, criterion = "all", thresholds_file, version = "1";
  std::optional<std::uint64_t> seed_override;

  auto* analyze = app.add_subcommand("analyze", "τ and w sweeps, extrema, w0 and R");
  analyze->add_option("input", input, "time-tag file (.csv/.ptag/.bin)")->required();
  analyze->add_option("-o,--out", out, "output directory")->required();
  add_grid_flags(analyze, grid);
  add_run_flags(analyze, run, true);
  analyze->add_option("--format", run.format, "sweep table format")->check(CLI::IsMember({"csv", "json"}));

  auto* simulate = app.add_subcommand("simulate", "simulate a scenario into a time-tag file");
  simulate->add_option("scenario", scenario, "scenario JSON")->required();
  simulate->add_option("-o,--out", out, "output stream (.csv/.ptag/.bin)")->required();
  simulate->add_option("--seed", seed_override, "override the scenario seed");
  simulate->add_option("--threads", run.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* certify = app.add_subcommand("certify", "test the two-level + classical noise model");
  certify->add_option("input", input, "time-tag file")->required();
  certify->add_option("-o,--out", out, "result JSON")->required();
  certify->add_option("--criterion", criterion, "alpha|gamma|gamma-alt|all")
      ->check(CLI::IsMember({"alpha", "gamma", "gamma-alt", "all"}));
  certify->add_option("--thresholds", thresholds_file, "constants cache (default: built-in)");
  add_grid_flags(certify, grid);
  add_run_flags(certify, run, true);

  OptimizerConfig ocfg;
  double w0_min = 1e-9, w0_max = 1e-8;
  int w0_points = 5;
  auto* thresholds = app.add_subcommand("thresholds", "compute F and E and write the constants cache");
  thresholds->add_option("-o,--out", out, "constants JSON")->required();
  thresholds->add_option("--grid", ocfg.grid, "grid points per axis")->check(CLI::Range(3, 100000));
  thresholds->add_option("--w0-min", w0_min, "smallest w0, s")->check(CLI::PositiveNumber);
  thresholds->add_option("--w0-max", w0_max, "largest w0, s")->check(CLI::PositiveNumber);
  thresholds->add_option("--w0-points", w0_points)->check(CLI::PositiveNumber);
  thresholds->add_option("--max-sweeps", ocfg.max_sweeps, "refinement budget per start");
  thresholds->add_option("--version-tag", version, "version written into the cache");
  thresholds->add_option("--threads", ocfg.threads)->check(CLI::PositiveNumber);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  RunManifest m;
  m.argv = args;
  if (*analyze) {
    m.command = "analyze";
    m.inputs.emplace_back(input, sha256_file(input));
    m.parameters = parameters_of(analyze);
    auto files = cmd_analyze(input, grid, run, out);
    write_manifest(fs::path(out) / "manifest.json", m, files);
  } else if (*simulate) {
    m.command = "simulate";
    m.inputs.emplace_back(scenario, sha256_file(scenario));
    m.parameters = parameters_of(simulate);
    auto files = cmd_simulate(scenario, out, run, seed_override);
    m.scenario_json = read_text(sibling(out, ".scenario.json"));
    write_manifest(sibling(out, ".manifest.json"), m, files);
  } else if (*certify) {
    m.command = "certify";
    m.inputs.emplace_back(input, sha256_file(input));
    if (!thresholds_file.empty()) m.inputs.emplace_back(thresholds_file, sha256_file(thresholds_file));
    m.parameters = parameters_of(certify);
    std::optional<fs::path> tf;
    if (!thresholds_file.empty()) tf = thresholds_file;
    auto files = cmd_certify(input, criterion, grid, run, tf, out, &m.thresholds_version);
    write_manifest(sibling(out, ".manifest.json"), m, files);
  } else if (*thresholds) {
    m.command = "thresholds";
    m.parameters = parameters_of(thresholds);
    if (w0_max < w0_min) throw ValidationError("--w0-max below --w0-min");
    std::vector<double> g;
    for (int i = 0; i < w0_points; ++i)
      g.push_back(w0_points == 1 ? w0_min : w0_min * std::pow(w0_max / w0_min, double(i) / (w0_points - 1)));
    auto files = cmd_thresholds(g, ocfg, version, out);
    m.thresholds_version = version;
    write_manifest(sibling(out, ".manifest.json"), m, files);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  set_warning_sink([](const std::string& w) { std::cerr << "warning: " << w << "\n"; });
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    // --from-manifest FILE replays the recorded argument vector
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] != "--from-manifest") continue;
      if (i + 1 >= args.size()) {
        std::cerr << "--from-manifest needs a file\n";
        return 1;
      }
      auto m = manifest_from_json(read_text(args[i + 1]));
      verify_inputs(m);
      args = m.argv;
      break;
    }
    return run(args);
  } catch (const OptimizerError& e) {
    std::cerr << "error: " << e.what() << "\ntrace: " << e.trace << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
