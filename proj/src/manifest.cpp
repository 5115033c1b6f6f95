#include "hbtcert/manifest.hpp"

#include "hbtcert/common.hpp"
#include "hbtcert/digest.hpp"

#include <openssl/evp.h>

#include <json.hpp>

#include <array>
#include <fstream>
#include <memory>

namespace hbt {

const char* tool_version() { return "0.3.0"; }

namespace {

struct Sha256 {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  Sha256() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  }
  void update(const void* p, std::size_t n) {
    if (EVP_DigestUpdate(ctx.get(), p, n) != 1) throw Error("sha256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw Error("sha256 final failed");
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) s += digits[md[i] >> 4], s += digits[md[i] & 15];
    return s;
  }
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

using nlohmann::ordered_json;

static ordered_json pairs(const std::vector<std::pair<std::string, std::string>>& v, const char* k1, const char* k2) {
  ordered_json a = ordered_json::array();
  for (const auto& [x, y] : v) a.push_back({{k1, x}, {k2, y}});
  return a;
}

static std::vector<std::pair<std::string, std::string>> unpairs(const ordered_json& a, const char* k1,
                                                                 const char* k2) {
  std::vector<std::pair<std::string, std::string>> v;
  for (const auto& e : a) v.emplace_back(e.at(k1).get<std::string>(), e.at(k2).get<std::string>());
  return v;
}

std::string manifest_to_json(const RunManifest& m) {
  ordered_json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["inputs"] = pairs(m.inputs, "path", "sha256");
  j["parameters"] = pairs(m.parameters, "name", "value");
  j["scenario"] = m.scenario_json.empty() ? ordered_json(nullptr) : ordered_json::parse(m.scenario_json);
  j["tool_version"] = m.tool_version;
  j["thresholds_version"] = m.thresholds_version;
  j["outputs"] = pairs(m.outputs, "path", "sha256");
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  try {
    auto j = ordered_json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.inputs = unpairs(j.at("inputs"), "path", "sha256");
    m.parameters = unpairs(j.value("parameters", ordered_json::array()), "name", "value");
    if (j.contains("scenario") && !j["scenario"].is_null()) m.scenario_json = j["scenario"].dump(2) + "\n";
    m.tool_version = j.value("tool_version", std::string{});
    m.thresholds_version = j.value("thresholds_version", std::string{});
    m.outputs = unpairs(j.value("outputs", ordered_json::array()), "path", "sha256");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
}

void verify_inputs(const RunManifest& m) {
  for (const auto& [path, digest] : m.inputs) {
    if (!std::filesystem::exists(path)) throw ValidationError("manifest input missing: " + path);
    if (sha256_file(path) != digest) throw ValidationError("manifest input changed since the run: " + path);
  }
}

}  // namespace hbt
