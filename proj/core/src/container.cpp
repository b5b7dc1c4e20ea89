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

#include "mlaface/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mlaface/error.hpp"

namespace mlaface {

namespace {

constexpr char kMagic[8] = {'M', 'L', 'A', 'F', 'A', 'C', 'E', '\0'};
constexpr std::uint8_t kDtypeReal = 1;
constexpr std::uint8_t kDtypeInt = 2;

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

class Writer {
 public:
  template <typename T>
  void scalar(T value) {
    value = to_little_endian(value);
    out_.append(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void bytes(const std::string& s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  template <typename T>
  T scalar() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little_endian(value);
  }
  std::string bytes(std::uint64_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (pos_ + n > in_.size()) {
      throw_data_error("array container truncated at byte {}", pos_);
    }
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

std::uint64_t element_count(const std::vector<std::uint64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1},
                         std::multiplies<>());
}

template <typename T>
void write_array(Writer& w, const std::string& name, std::uint8_t dtype,
                 const ArrayContainer::Array<T>& a) {
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.scalar<std::uint8_t>(dtype);
  w.scalar<std::uint8_t>(static_cast<std::uint8_t>(a.shape.size()));
  for (auto d : a.shape) w.scalar<std::uint64_t>(d);
  for (T v : a.values) w.scalar<T>(v);
}

}  // namespace

void ArrayContainer::put_real(const std::string& name, std::vector<std::uint64_t> shape,
                              std::vector<double> values) {
  check_size(name.c_str(), static_cast<long long>(values.size()),
             static_cast<long long>(element_count(shape)));
  ints_.erase(name);
  reals_[name] = RealArray{std::move(shape), std::move(values)};
}

void ArrayContainer::put_int(const std::string& name, std::vector<std::uint64_t> shape,
                             std::vector<std::int64_t> values) {
  check_size(name.c_str(), static_cast<long long>(values.size()),
             static_cast<long long>(element_count(shape)));
  reals_.erase(name);
  ints_[name] = IntArray{std::move(shape), std::move(values)};
}

const ArrayContainer::RealArray& ArrayContainer::real(const std::string& name) const {
  auto it = reals_.find(name);
  if (it == reals_.end()) throw_data_error("container has no real array '{}'", name);
  return it->second;
}

const ArrayContainer::IntArray& ArrayContainer::integer(const std::string& name) const {
  auto it = ints_.find(name);
  if (it == ints_.end()) throw_data_error("container has no integer array '{}'", name);
  return it->second;
}

std::string ArrayContainer::serialize() const {
  Writer w;
  w.bytes(std::string(kMagic, sizeof(kMagic)));
  w.scalar<std::uint32_t>(kVersion);
  w.scalar<std::uint64_t>(metadata_.size());
  w.bytes(metadata_);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(reals_.size() + ints_.size()));
  for (const auto& [name, a] : reals_) write_array(w, name, kDtypeReal, a);
  for (const auto& [name, a] : ints_) write_array(w, name, kDtypeInt, a);
  return w.take();
}

ArrayContainer ArrayContainer::deserialize(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw_data_error("not an mlaface array container (bad magic)");
  }
  const auto version = r.scalar<std::uint32_t>();
  if (version != kVersion) {
    throw_data_error("unsupported container version {} (expected {})", version, kVersion);
  }
  ArrayContainer c;
  c.metadata_ = r.bytes(r.scalar<std::uint64_t>());
  const auto count = r.scalar<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.scalar<std::uint32_t>());
    const auto dtype = r.scalar<std::uint8_t>();
    const auto ndim = r.scalar<std::uint8_t>();
    std::vector<std::uint64_t> shape(ndim);
    for (auto& d : shape) d = r.scalar<std::uint64_t>();
    const std::uint64_t n = element_count(shape);
    if (dtype == kDtypeReal) {
      std::vector<double> values(n);
      for (auto& v : values) v = r.scalar<double>();
      c.reals_[name] = RealArray{std::move(shape), std::move(values)};
    } else if (dtype == kDtypeInt) {
      std::vector<std::int64_t> values(n);
      for (auto& v : values) v = r.scalar<std::int64_t>();
      c.ints_[name] = IntArray{std::move(shape), std::move(values)};
    } else {
      throw_data_error("array '{}' has unknown dtype {}", name, dtype);
    }
  }
  if (!r.done()) throw_data_error("trailing bytes after last array");
  return c;
}

void ArrayContainer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data_error("cannot open '{}' for writing", path.string());
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_data_error("failed writing '{}'", path.string());
}

ArrayContainer ArrayContainer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data_error("cannot open '{}'", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace mlaface
