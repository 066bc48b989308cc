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

#ifndef CP3_CONFIG_HPP_
#define CP3_CONFIG_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cp3/geometry.hpp"

namespace cp3 {

// Flat `key = value` configuration text: one pair per line, `#` comments and
// blank lines ignored. Malformed lines raise ValidationError with the line
// number and origin.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text,
                            const std::string& origin = "<config>");
ConfigMap parse_config_file(const std::filesystem::path& path);

// Typed getters. Present keys must parse completely; absent keys yield the
// default.
std::string cfg_str(const ConfigMap& cfg, const std::string& key,
                    const std::string& def);
long cfg_int(const ConfigMap& cfg, const std::string& key, long def);
double cfg_double(const ConfigMap& cfg, const std::string& key, double def);
bool cfg_bool(const ConfigMap& cfg, const std::string& key, bool def);
// Comma-separated positive integers, e.g. "1,1,8".
std::vector<Index> cfg_index_list(const ConfigMap& cfg, const std::string& key,
                                  const std::vector<Index>& def);

// Rejects keys outside `known` so typos fail loudly instead of silently
// falling back to defaults.
void require_known_keys(const ConfigMap& cfg,
                        const std::vector<std::string>& known);

}  // namespace cp3

#endif  // CP3_CONFIG_HPP_
