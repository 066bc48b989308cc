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

#ifndef CP3_CHECKPOINT_HPP_
#define CP3_CHECKPOINT_HPP_

#include <filesystem>
#include <map>
#include <string>

#include "cp3/tensor.hpp"

namespace cp3 {

inline constexpr char kCheckpointMagic[] = "CP3-CKPT-1";

// Self-describing text container: a versioned header, a config block of
// key/value pairs, then named tensors with shapes. Values are written as
// hexfloats, so save/load round-trips bit for bit and identical states
// produce identical files.
struct Checkpoint {
  std::map<std::string, std::string> config;
  std::map<std::string, Mat> tensors;
};

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cp3

#endif  // CP3_CHECKPOINT_HPP_
