#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hbt {

const char* tool_version();

// Everything needed to repeat a CLI run: the argument vector is replayed
// verbatim, the digests guard against changed inputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // after the program name, without --from-manifest
  std::vector<std::pair<std::string, std::string>> inputs;      // path, sha256
  std::vector<std::pair<std::string, std::string>> parameters;  // name, value
  std::string scenario_json;  // echo, empty if none
  std::string tool_version;
  std::string thresholds_version;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);
// throws ValidationError when an input is gone or its digest changed
void verify_inputs(const RunManifest& m);

}  // namespace hbt
