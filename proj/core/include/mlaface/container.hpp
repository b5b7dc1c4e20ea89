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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mlaface {

// Keyed array container used for morphable models, checkpoints and raw
// float images.
//
// File layout, all integers little-endian:
//   magic     8 bytes  "MLAFACE\0"
//   version   u32      currently 1
//   meta_len  u64      length of the UTF-8 metadata blob
//   meta      bytes    free-form (JSON by convention)
//   count     u32      number of arrays
//   per array:
//     name_len u32, name bytes
//     dtype    u8      1 = float64, 2 = int64
//     ndim     u8
//     dims     u64 x ndim
//     payload  8 bytes x prod(dims), row-major
class ArrayContainer {
 public:
  static constexpr std::uint32_t kVersion = 1;

  template <typename T>
  struct Array {
    std::vector<std::uint64_t> shape;
    std::vector<T> values;
  };
  using RealArray = Array<double>;
  using IntArray = Array<std::int64_t>;

  void put_real(const std::string& name, std::vector<std::uint64_t> shape,
                std::vector<double> values);
  void put_int(const std::string& name, std::vector<std::uint64_t> shape,
               std::vector<std::int64_t> values);

  bool has_real(const std::string& name) const { return reals_.count(name) > 0; }
  bool has_int(const std::string& name) const { return ints_.count(name) > 0; }

  // Throws a data error naming the missing key.
  const RealArray& real(const std::string& name) const;
  const IntArray& integer(const std::string& name) const;

  const std::map<std::string, RealArray>& reals() const { return reals_; }
  const std::map<std::string, IntArray>& ints() const { return ints_; }

  const std::string& metadata() const { return metadata_; }
  void set_metadata(std::string metadata) { metadata_ = std::move(metadata); }

  void save(const std::filesystem::path& path) const;
  static ArrayContainer load(const std::filesystem::path& path);

  std::string serialize() const;
  static ArrayContainer deserialize(const std::string& bytes);

 private:
  std::string metadata_;
  std::map<std::string, RealArray> reals_;
  std::map<std::string, IntArray> ints_;
};

}  // namespace mlaface
