#pragma once

#include "hbtcert/certify.hpp"
#include "hbtcert/correlator.hpp"
#include "hbtcert/simulator.hpp"

#include <filesystem>
#include <string>

namespace hbt {

// plot-ready sweep table; numbers printed with 17 significant digits
std::string sweep_to_csv(const SweepSeries& s);
std::string sweep_to_json(const SweepSeries& s);

// scenario schema; unknown keys are rejected, bad values listed field by field
EmitterScenario scenario_from_json(const std::string& text);
EmitterScenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const EmitterScenario& sc);

std::string certification_to_json(const CertificationResult& r);
// one line for humans
std::string verdict_line(const CertificationResult& r);

std::string thresholds_to_json(const Thresholds& t);
Thresholds thresholds_from_json(const std::string& text);
Thresholds load_thresholds(const std::filesystem::path& path);
std::string threshold_report_to_json(const ThresholdReport& r, const std::string& version);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hbt
