#include "hbtcert/serialize.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace hbt {

using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON has no NaN; undefined values become null
ordered_json jnum(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

std::string sweep_to_csv(const SweepSeries& s) {
  std::string out = "axis,axis_value_ps,alpha,err_alpha,beta,err_beta,gamma,err_gamma,p1,p0,p11,p10,p00,n_bins\n";
  for (const auto& p : s.points) {
    const auto& t = p.triple;
    const auto& q = p.probs;
    out += std::string(axis_name(s.axis)) + "," + std::to_string(p.axis_value_ps);
    for (double v : {t.alpha, t.err_alpha, t.beta, t.err_beta, t.gamma, t.err_gamma, q.p1, q.p0, q.p11, q.p10, q.p00})
      out += "," + num(v);
    out += "," + std::to_string(p.n_bins) + "\n";
  }
  return out;
}

std::string sweep_to_json(const SweepSeries& s) {
  ordered_json j;
  j["axis"] = axis_name(s.axis);
  j["symmetrization"] = "geometric";
  j["points"] = ordered_json::array();
  for (const auto& p : s.points) {
    const auto& t = p.triple;
    const auto& q = p.probs;
    j["points"].push_back({{"axis", axis_name(s.axis)},
                           {"axis_value_ps", p.axis_value_ps},
                           {"w_ps", p.w_ps},
                           {"tau_ps", p.tau_ps},
                           {"alpha", jnum(t.alpha)},
                           {"err_alpha", jnum(t.err_alpha)},
                           {"beta", jnum(t.beta)},
                           {"err_beta", jnum(t.err_beta)},
                           {"gamma", jnum(t.gamma)},
                           {"err_gamma", jnum(t.err_gamma)},
                           {"p1", q.p1},
                           {"p0", q.p0},
                           {"p11", q.p11},
                           {"p10", q.p10},
                           {"p00", q.p00},
                           {"n_bins", p.n_bins}});
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- scenario

EmitterScenario scenario_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
  static const std::set<std::string> known = {"model",      "kappa_p",  "kappa_r",     "kappa_1",      "kappa_2",
                                              "noise",      "T",        "n_emitters",  "survival",     "duration_s",
                                              "dead_time_ps", "seed",   "resolution_ps", "sampler"};
  std::vector<std::string> bad;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) bad.push_back(it.key() + " (unknown)");

  auto number = [&](const ordered_json& o, const std::string& key, const std::string& label, double dflt,
                    bool required) -> double {
    if (!o.contains(key)) {
      if (required) bad.push_back(label + " (missing)");
      return dflt;
    }
    if (!o[key].is_number()) {
      bad.push_back(label + " (not a number)");
      return dflt;
    }
    return o[key].get<double>();
  };
  auto integer = [&](const ordered_json& o, const std::string& key, std::uint64_t dflt) -> std::uint64_t {
    if (!o.contains(key)) return dflt;
    if (!o[key].is_number_unsigned()) {
      bad.push_back(key + " (not a non-negative integer)");
      return dflt;
    }
    return o[key].get<std::uint64_t>();
  };

  EmitterScenario sc;
  std::string model = "two_level";
  if (!j.contains("model") || !j["model"].is_string())
    bad.push_back("model (missing or not a string)");
  else
    model = j["model"].get<std::string>();
  const double kp = number(j, "kappa_p", "kappa_p", 0, true);
  const double kr = number(j, "kappa_r", "kappa_r", 0, true);
  if (model == "two_level") {
    for (const char* k : {"kappa_1", "kappa_2"})
      if (j.contains(k)) bad.push_back(std::string(k) + " (not used by two_level)");
    sc.model = TwoLevelParams{kp, kr};
  } else if (model == "three_level") {
    ThreeLevelParams p;
    p.kappa_p = kp, p.kappa_r = kr;
    p.kappa_1 = number(j, "kappa_1", "kappa_1", 0, true);
    p.kappa_2 = number(j, "kappa_2", "kappa_2", 0, true);
    sc.model = p;
  } else {
    bad.push_back("model (expected two_level or three_level)");
  }
  sc.det.T = number(j, "T", "T", 1, false);
  sc.n_emitters = static_cast<int>(integer(j, "n_emitters", 1));
  sc.survival = number(j, "survival", "survival", 1, false);
  sc.duration_s = number(j, "duration_s", "duration_s", 0, true);
  sc.dead_time_ps = integer(j, "dead_time_ps", 0);
  sc.seed = integer(j, "seed", 0);
  sc.resolution_ps = static_cast<std::uint32_t>(integer(j, "resolution_ps", 4));
  if (j.contains("sampler")) {
    const auto s = j["sampler"].is_string() ? j["sampler"].get<std::string>() : "";
    if (s == "auto") sc.sampler = Sampler::automatic;
    else if (s == "explicit") sc.sampler = Sampler::explicit_path;
    else if (s == "collapsed") sc.sampler = Sampler::collapsed;
    else bad.push_back("sampler (expected auto, explicit or collapsed)");
  }
  if (j.contains("noise") && !j["noise"].is_null()) {
    const auto& n = j["noise"];
    if (!n.is_object()) {
      bad.push_back("noise (not an object)");
    } else {
      NoiseSpec ns;
      const std::string type = n.contains("type") && n["type"].is_string() ? n["type"].get<std::string>() : "";
      if (type == "poisson") ns.type = NoiseSpec::Type::poisson;
      else if (type == "exp_bunched") ns.type = NoiseSpec::Type::exp_bunched;
      else bad.push_back("noise.type (expected poisson or exp_bunched)");
      ns.rate_hz = number(n, "rate_hz", "noise.rate_hz", 0, true);
      const bool bunched = ns.type == NoiseSpec::Type::exp_bunched;
      ns.g2_zero = number(n, "g2_zero", "noise.g2_zero", 1, bunched);
      ns.tau_c_s = number(n, "tau_c_s", "noise.tau_c_s", 0, bunched);
      for (auto it = n.begin(); it != n.end(); ++it)
        if (it.key() != "type" && it.key() != "rate_hz" && it.key() != "g2_zero" && it.key() != "tau_c_s")
          bad.push_back("noise." + it.key() + " (unknown)");
      sc.noise = ns;
    }
  }
  if (bad.empty()) {
    try {
      sc.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("scenario: ") + e.what());
    }
    return sc;
  }
  std::string msg = "invalid scenario fields:";
  for (auto& b : bad) msg += "\n  " + b;
  throw ValidationError(msg);
}

EmitterScenario load_scenario(const std::filesystem::path& path) { return scenario_from_json(read_text(path)); }

std::string scenario_to_json(const EmitterScenario& sc) {
  ordered_json j;
  if (auto* p = std::get_if<TwoLevelParams>(&sc.model)) {
    j["model"] = "two_level";
    j["kappa_p"] = p->kappa_p;
    j["kappa_r"] = p->kappa_r;
  } else {
    const auto& q = std::get<ThreeLevelParams>(sc.model);
    j["model"] = "three_level";
    j["kappa_p"] = q.kappa_p;
    j["kappa_r"] = q.kappa_r;
    j["kappa_1"] = q.kappa_1;
    j["kappa_2"] = q.kappa_2;
  }
  if (sc.noise) {
    ordered_json n;
    n["type"] = sc.noise->type == NoiseSpec::Type::poisson ? "poisson" : "exp_bunched";
    n["rate_hz"] = sc.noise->rate_hz;
    n["g2_zero"] = sc.noise->g2_zero;
    n["tau_c_s"] = sc.noise->tau_c_s;
    j["noise"] = n;
  }
  j["T"] = sc.det.T;
  j["n_emitters"] = sc.n_emitters;
  j["survival"] = sc.survival;
  j["duration_s"] = sc.duration_s;
  j["dead_time_ps"] = sc.dead_time_ps;
  j["seed"] = sc.seed;
  j["resolution_ps"] = sc.resolution_ps;
  j["sampler"] = sc.sampler == Sampler::automatic ? "auto" : sc.sampler == Sampler::collapsed ? "collapsed" : "explicit";
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- certification

std::string certification_to_json(const CertificationResult& r) {
  ordered_json j;
  j["criterion"] = criterion_name(r.criterion);
  j["statistic"] = jnum(r.statistic);
  j["threshold"] = r.threshold;
  j["sigma"] = jnum(r.sigma);
  j["margin_sigma"] = std::isnan(r.margin_sigma) ? ordered_json(nullptr)
                      : std::isinf(r.margin_sigma) ? ordered_json(r.margin_sigma > 0 ? "inf" : "-inf")
                                                   : ordered_json(r.margin_sigma);
  j["verdict"] = verdict_name(r.verdict);
  ordered_json s;
  s["w0_ps"] = r.supporting.w0_ps ? ordered_json(*r.supporting.w0_ps) : ordered_json(nullptr);
  s["gamma_bar"] = jnum(r.supporting.gamma_bar);
  s["R_w0"] = jnum(r.supporting.R_w0);
  s["w_at_max"] = jnum(r.supporting.w_at_max);
  s["constant"] = jnum(r.supporting.constant);
  s["valid_replicates"] = r.supporting.valid_replicates;
  j["supporting"] = s;
  if (!r.note.empty()) j["note"] = r.note;
  j["thresholds_version"] = r.thresholds_version;
  return j.dump(2) + "\n";
}

std::string verdict_line(const CertificationResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: %s (statistic %.6g, threshold %.6g, margin %.3g sigma)",
                criterion_name(r.criterion), verdict_name(r.verdict), r.statistic, r.threshold, r.margin_sigma);
  std::string s = buf;
  if (!r.note.empty()) s += " - " + r.note;
  return s;
}

// ---------------------------------------------------------------- thresholds

std::string thresholds_to_json(const Thresholds& t) {
  ordered_json j;
  j["F"] = t.F;
  j["E"] = t.E;
  j["version"] = t.version;
  j["w0_grid"] = t.w0_grid;
  j["optimizer_trace_digest"] = t.optimizer_trace_digest;
  return j.dump(2) + "\n";
}

Thresholds thresholds_from_json(const std::string& text) {
  try {
    auto j = ordered_json::parse(text);
    Thresholds t;
    t.F = j.at("F").get<double>();
    t.E = j.at("E").get<double>();
    t.version = j.value("version", std::string{});
    t.w0_grid = j.value("w0_grid", std::vector<double>{});
    t.optimizer_trace_digest = j.value("optimizer_trace_digest", std::string{});
    if (!(t.F > 0) || !(t.E > 0)) throw ValidationError("thresholds must be positive");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("thresholds file: ") + e.what());
  }
}

Thresholds load_thresholds(const std::filesystem::path& path) { return thresholds_from_json(read_text(path)); }

std::string threshold_report_to_json(const ThresholdReport& r, const std::string& version) {
  ordered_json j;
  j["F"] = r.F_value;
  j["E"] = r.E_value;
  j["version"] = version;
  j["w0_grid"] = r.w0_grid;
  j["optimizer_trace_digest"] = r.trace_digest;
  j["per_w0_F"] = r.per_w0_values;
  j["per_w0_E"] = r.per_w0_E;
  j["max_deviation_F"] = r.max_deviation;
  j["max_deviation_E"] = r.max_deviation_E;
  j["argmax_F"] = {{"x0", r.best_x0}, {"u", r.best_u}};
  j["argmax_E"] = {{"x0", r.best_x_E}};
  ordered_json tr;
  tr["evaluations"] = r.trace.evaluations;
  for (const auto& s : r.trace.starts)
    tr["starts"].push_back({{"x0", s.x0}, {"u", s.u}, {"value", s.value}, {"best_x0", s.best_x0},
                            {"best_u", s.best_u}, {"best_value", s.best_value}, {"sweeps", s.sweeps},
                            {"last_step", s.last_step}});
  j["trace_first_w0"] = tr;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- files

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace hbt
