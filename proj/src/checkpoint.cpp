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

#include "cp3/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cp3/geometry.hpp"

namespace cp3 {

namespace {

std::string hexfloat(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

void check_token(const std::string& token, const char* what) {
  if (token.empty() || token.find_first_of(" \t\n=") != std::string::npos)
    throw ValidationError(std::string("checkpoint: bad ") + what + " '" +
                          token + "'");
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  for (const auto& [key, value] : ckpt.config) {
    check_token(key, "config key");
    if (value.find('\n') != std::string::npos)
      throw ValidationError("checkpoint: config value with newline under '" +
                            key + "'");
  }
  for (const auto& [name, tensor] : ckpt.tensors) {
    check_token(name, "tensor name");
    if (!tensor.allFinite())
      throw ValidationError("checkpoint: non-finite tensor '" + name + "'");
  }

  std::ostringstream out;
  out << kCheckpointMagic << "\n";
  out << "config " << ckpt.config.size() << "\n";
  for (const auto& [key, value] : ckpt.config)
    out << key << " = " << value << "\n";
  out << "tensors " << ckpt.tensors.size() << "\n";
  for (const auto& [name, tensor] : ckpt.tensors) {
    out << "tensor " << name << ' ' << tensor.rows() << ' ' << tensor.cols()
        << "\n";
    for (Index r = 0; r < tensor.rows(); ++r) {
      for (Index c = 0; c < tensor.cols(); ++c) {
        if (c) out << ' ';
        out << hexfloat(tensor(r, c));
      }
      out << "\n";
    }
  }
  out << "end\n";

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path.string());
  f << out.str();
  if (!f) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open checkpoint: " + path.string());

  auto fail = [&path](const std::string& why) -> std::runtime_error {
    return std::runtime_error("checkpoint " + path.string() + ": " + why);
  };

  std::string line;
  if (!std::getline(f, line) || line != kCheckpointMagic)
    throw ValidationError("checkpoint " + path.string() +
                          ": missing header '" + kCheckpointMagic + "'");

  Checkpoint ckpt;
  std::size_t n_config = 0;
  {
    std::string tag;
    if (!(f >> tag >> n_config) || tag != "config")
      throw fail("expected config block");
    std::getline(f, line);
  }
  for (std::size_t i = 0; i < n_config; ++i) {
    if (!std::getline(f, line)) throw fail("truncated config block");
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw fail("bad config line '" + line + "'");
    ckpt.config[line.substr(0, eq)] = line.substr(eq + 3);
  }

  std::size_t n_tensors = 0;
  {
    std::string tag;
    if (!(f >> tag >> n_tensors) || tag != "tensors")
      throw fail("expected tensor block");
  }
  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::string tag, name;
    Index rows = 0, cols = 0;
    if (!(f >> tag >> name >> rows >> cols) || tag != "tensor")
      throw fail("bad tensor header");
    if (rows < 0 || cols < 0 || rows * cols > (1LL << 28))
      throw fail("unreasonable tensor shape for '" + name + "'");
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        std::string tok;
        if (!(f >> tok)) throw fail("truncated tensor '" + name + "'");
        char* endp = nullptr;
        const double v = std::strtod(tok.c_str(), &endp);
        if (endp != tok.c_str() + tok.size())
          throw fail("bad value '" + tok + "' in tensor '" + name + "'");
        m(r, c) = v;
      }
    if (ckpt.tensors.count(name)) throw fail("duplicate tensor '" + name + "'");
    ckpt.tensors[name] = std::move(m);
  }
  std::string tag;
  if (!(f >> tag) || tag != "end") throw fail("missing end marker");
  return ckpt;
}

}  // namespace cp3
