#include "commands.hpp"

#include "hbtcert/serialize.hpp"

#include <json.hpp>

#include <iostream>

namespace hbt::cli {

using nlohmann::ordered_json;

std::vector<std::int64_t> w_grid(const TimeTagStream& s, const GridFlags& g) {
  if (g.w_min == 0 && g.w_max == 0 && g.w_points == 60) return default_w_grid(s);
  const std::int64_t lo = g.w_min ? g.w_min : 4 * static_cast<std::int64_t>(s.resolution_ps());
  const std::int64_t hi = g.w_max ? g.w_max : static_cast<std::int64_t>(s.duration_ps() / 100);
  return log_grid(lo, hi, g.w_points);
}

std::vector<std::int64_t> tau_grid(const GridFlags& g) { return linear_grid(g.tau_min, g.tau_max, g.tau_points); }

std::optional<BootstrapConfig> bootstrap_config(const RunFlags& f) {
  if (f.bootstrap <= 0) return std::nullopt;
  BootstrapConfig c;
  c.n_resamples = f.bootstrap;
  c.block_ps = f.block_ps;
  c.seed = f.seed;
  return c;
}

static std::string sweep_text(const SweepSeries& s, const std::string& format) {
  return format == "json" ? sweep_to_json(s) : sweep_to_csv(s);
}

static ordered_json jnum(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

static TimeTagStream load_checked(const std::filesystem::path& input) {
  auto s = load_stream(input, format_from_path(input));
  if (s.empty()) throw ValidationError("stream has no time tags: " + input.string());
  if (s.unsorted_records()) warn(std::to_string(s.unsorted_records()) + " out-of-order records were sorted");
  return s;
}

std::vector<std::filesystem::path> cmd_analyze(const std::filesystem::path& input, const GridFlags& g,
                                               const RunFlags& f, const std::filesystem::path& out_dir) {
  const auto s = load_checked(input);
  const auto boot = bootstrap_config(f);
  const BootstrapConfig* bp = boot ? &*boot : nullptr;
  const auto ws = w_grid(s, g);
  const auto taus = tau_grid(g);
  auto wa = analyze_sweep(s, SweepSpec{Axis::w, ws, g.tau}, bp, f.threads);
  auto ta = analyze_sweep(s, SweepSpec{Axis::tau, taus, g.tau_w}, bp, f.threads);

  const std::string ext = f.format == "json" ? ".json" : ".csv";
  std::vector<std::filesystem::path> files = {out_dir / ("tau_sweep" + ext), out_dir / ("w_sweep" + ext),
                                              out_dir / "summary.json"};
  write_text(files[0], sweep_text(ta.series, f.format));
  write_text(files[1], sweep_text(wa.series, f.format));

  auto st = stream_stats(s);
  ordered_json j;
  j["stream"] = {{"count_a", st.count_a}, {"count_b", st.count_b}, {"rate_a_hz", st.rate_a},
                 {"rate_b_hz", st.rate_b}, {"duration_s", st.duration_s}};
  auto e = extrema(wa.series);
  ordered_json w;
  w["tau_ps"] = g.tau;
  w["gamma_bar"] = jnum(e.gamma_bar);
  w["argmax_gamma_ps"] = e.argmax_gamma;
  w["alpha_bar"] = jnum(e.alpha_bar);
  w["beta_bar"] = jnum(e.beta_bar);
  W0Result w0;
  try {
    w0 = find_w0(wa.series);
  } catch (const ValidationError&) {
  }
  w["w0_status"] = w0_status_name(w0.status);
  w["w0_ps"] = w0.w0_ps ? ordered_json(*w0.w0_ps) : ordered_json(nullptr);
  // without a downward crossing of γ through 1 there is no calibrated rate
  w["degenerate"] = w0.status != W0Status::crossing;
  SuccessRate R;
  if (w0.w0_ps) R = success_rate(wa.series, w0.w0_ps);
  w["R_w0"] = jnum(R.mean);
  w["R_spread"] = w0.w0_ps ? jnum(R.spread) : ordered_json(nullptr);
  w["R_linear_regime"] = R.linear_regime;
  j["w_sweep"] = w;
  auto et = extrema(ta.series);
  double amax = -INFINITY;
  for (const auto& p : ta.series.points)
    if (p.defined) amax = std::max(amax, p.triple.alpha);
  j["tau_sweep"] = {{"w_ps", g.tau_w},
                    {"alpha_min", jnum(et.alpha_bar)},
                    {"argmin_alpha_ps", et.argmin_alpha},
                    {"alpha_max", jnum(amax)},
                    {"alpha_span", jnum(amax - et.alpha_bar)}};
  j["bootstrap"] = {{"resamples", f.bootstrap}, {"block_ps", wa.block_ps}, {"seed", f.seed}};
  write_text(files[2], j.dump(2) + "\n");
  return files;
}

std::vector<std::filesystem::path> cmd_simulate(const std::filesystem::path& scenario,
                                                const std::filesystem::path& out, const RunFlags& f,
                                                std::optional<std::uint64_t> seed_override) {
  auto sc = load_scenario(scenario);
  if (seed_override) sc.seed = *seed_override;
  auto ds = simulate_dataset(sc, f.threads);
  save_stream(ds.stream, out, format_from_path(out));
  std::vector<std::filesystem::path> files = {out};
  if (format_from_path(out) == StreamFormat::csv) files.push_back(csv_sidecar_path(out));
  auto echo = out;
  echo.replace_extension(".scenario.json");
  write_text(echo, scenario_to_json(ds.scenario));
  files.push_back(echo);
  std::cerr << "simulated " << ds.stream.size() << " tags (" << sampler_name(ds.sampler_used) << " sampler)\n";
  return files;
}

std::vector<std::filesystem::path> cmd_certify(const std::filesystem::path& input, const std::string& criterion,
                                               const GridFlags& g, const RunFlags& f,
                                               const std::optional<std::filesystem::path>& thresholds_file,
                                               const std::filesystem::path& out, std::string* thresholds_version) {
  const Thresholds th = thresholds_file ? load_thresholds(*thresholds_file) : builtin_thresholds();
  if (thresholds_version) *thresholds_version = th.version;
  const auto s = load_checked(input);
  const auto boot = bootstrap_config(f);
  const BootstrapConfig* bp = boot ? &*boot : nullptr;
  std::vector<CertificationResult> results;
  const bool all = criterion == "all";
  if (all || criterion == "gamma" || criterion == "gamma-alt") {
    auto wa = analyze_sweep(s, SweepSpec{Axis::w, w_grid(s, g), g.tau}, bp, f.threads);
    if (all || criterion == "gamma") results.push_back(check_gamma_criterion(wa, th));
    if (all || criterion == "gamma-alt") results.push_back(check_gamma_alt_criterion(wa, th));
  }
  if (all || criterion == "alpha") {
    auto ta = analyze_sweep(s, SweepSpec{Axis::tau, tau_grid(g), g.tau_w}, bp, f.threads);
    results.push_back(check_alpha_criterion(ta));
  }
  if (results.empty()) throw ValidationError("unknown criterion: " + criterion);
  std::string text;
  if (results.size() == 1) {
    text = certification_to_json(results[0]);
  } else {
    ordered_json a = ordered_json::array();
    for (const auto& r : results) a.push_back(ordered_json::parse(certification_to_json(r)));
    text = a.dump(2) + "\n";
  }
  write_text(out, text);
  for (const auto& r : results) std::cout << verdict_line(r) << "\n";
  return {out};
}

std::vector<std::filesystem::path> cmd_thresholds(const std::vector<double>& w0_grid, const OptimizerConfig& cfg,
                                                  const std::string& version, const std::filesystem::path& out) {
  auto r = compute_thresholds(w0_grid, cfg);
  write_text(out, threshold_report_to_json(r, version));
  std::cout << "F = " << r.F_value << " (spread " << r.max_deviation << "), E = " << r.E_value << " (spread "
            << r.max_deviation_E << ")\n";
  return {out};
}

}  // namespace hbt::cli
