// Copyright 2026 cp3 contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cp3/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cp3 {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* kind) {
  throw ValidationError("config key '" + key + "': bad " + kind + " value '" +
                        value + "'");
}

}  // namespace

ConfigMap parse_config_text(const std::string& text,
                            const std::string& origin) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(origin + ": line " + std::to_string(line_no) +
                            ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key.find_first_of(" \t") != std::string::npos)
      throw ValidationError(origin + ": line " + std::to_string(line_no) +
                            ": bad key");
    if (cfg.count(key))
      throw ValidationError(origin + ": line " + std::to_string(line_no) +
                            ": duplicate key '" + key + "'");
    cfg[key] = value;
  }
  return cfg;
}

ConfigMap parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string cfg_str(const ConfigMap& cfg, const std::string& key,
                    const std::string& def) {
  const auto it = cfg.find(key);
  return it == cfg.end() ? def : it->second;
}

long cfg_int(const ConfigMap& cfg, const std::string& key, long def) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return def;
  long v = 0;
  const char* b = it->second.data();
  const char* e = b + it->second.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e)
    bad_value(key, it->second, "integer");
  return v;
}

double cfg_double(const ConfigMap& cfg, const std::string& key, double def) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return def;
  char* endp = nullptr;
  const double v = std::strtod(it->second.c_str(), &endp);
  if (endp != it->second.c_str() + it->second.size() || it->second.empty())
    bad_value(key, it->second, "number");
  return v;
}

bool cfg_bool(const ConfigMap& cfg, const std::string& key, bool def) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return def;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  bad_value(key, it->second, "boolean");
}

std::vector<Index> cfg_index_list(const ConfigMap& cfg, const std::string& key,
                                  const std::vector<Index>& def) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return def;
  std::vector<Index> out;
  std::istringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    Index v = 0;
    const char* b = item.data();
    const char* e = b + item.size();
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc{} || res.ptr != e || v < 1)
      bad_value(key, it->second, "positive integer list");
    out.push_back(v);
  }
  if (out.empty()) bad_value(key, it->second, "positive integer list");
  return out;
}

void require_known_keys(const ConfigMap& cfg,
                        const std::vector<std::string>& known) {
  for (const auto& [key, value] : cfg)
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ValidationError("unknown config key '" + key + "'");
}

}  // namespace cp3
