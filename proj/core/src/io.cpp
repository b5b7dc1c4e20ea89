// Copyright 2026 The mlaface Authors
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

#include "mlaface/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "mlaface/error.hpp"

namespace mlaface {

Landmarks2 read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data_error("cannot open landmark file {}", path.string());
  Landmarks2 lm;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (row >= kNumLandmarks) throw_data_error("{}: more than {} landmark lines", path.string(), kNumLandmarks);
    std::istringstream ss(line);
    double x = 0.0, y = 0.0;
    if (!(ss >> x >> y) || !std::isfinite(x) || !std::isfinite(y)) {
      throw_data_error("{}: bad landmark line {}", path.string(), row + 1);
    }
    lm(row, 0) = x;
    lm(row, 1) = y;
    ++row;
  }
  if (row != kNumLandmarks) {
    throw_data_error("{}: expected {} landmark lines, got {}", path.string(), kNumLandmarks, row);
  }
  return lm;
}

void write_landmarks(const Landmarks2& landmarks, const std::filesystem::path& path) {
  std::string text;
  for (int i = 0; i < kNumLandmarks; ++i) text += fmt::format("{:.17g} {:.17g}\n", landmarks(i, 0), landmarks(i, 1));
  write_text(path, text);
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data_error("cannot open manifest {}", path.string());
  std::vector<nlohmann::json> records;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw_data_error("{}:{}: invalid JSON: {}", path.string(), number, e.what());
    }
    if (!records.back().is_object()) throw_data_error("{}:{}: record is not an object", path.string(), number);
  }
  return records;
}

std::filesystem::path resolve_path(const std::filesystem::path& manifest, const std::string& entry) {
  const std::filesystem::path p(entry);
  if (p.is_absolute()) return p;
  return manifest.parent_path() / p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data_error("cannot write {}", path.string());
  out << text;
  if (!out) throw_data_error("write failed for {}", path.string());
}

}  // namespace mlaface
