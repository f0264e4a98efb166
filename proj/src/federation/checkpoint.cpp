/**
 * Copyright 2026 The rolefed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "federation/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "util/errors.hpp"

namespace rolefed {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxName = 1u << 16;
constexpr std::uint32_t kMaxRank = 8;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void le(T v) {
    unsigned char b[sizeof(T)];
    std::uint64_t bits = 0;
    if constexpr (sizeof(T) == 8) {
      bits = std::bit_cast<std::uint64_t>(v);
    } else {
      bits = static_cast<std::uint64_t>(std::bit_cast<std::uint32_t>(v));
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), sizeof(T));
  }

  void str(const std::string& s) {
    le<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

  template <typename T>
  T le() {
    unsigned char b[sizeof(T)];
    bytes(reinterpret_cast<char*>(b), sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    if constexpr (sizeof(T) == 8) {
      return std::bit_cast<T>(bits);
    } else {
      return std::bit_cast<T>(static_cast<std::uint32_t>(bits));
    }
  }

  std::string str() {
    const auto n = le<std::uint32_t>();
    if (n > kMaxName) fail("string too long");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  void bytes(char* dst, std::size_t n) {
    if (!in_.read(dst, static_cast<std::streamsize>(n))) fail("truncated file");
  }

  [[noreturn]] void fail(const std::string& why) { throw InputError(path_ + ": " + why); }

 private:
  std::istream& in_;
  const std::string& path_;
};

}  // namespace

void write_checkpoint(const std::string& path, const ParamSet& params, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.le<std::uint32_t>(kVersion);
  w.str(meta.run_id);
  w.le<std::uint64_t>(meta.round);
  w.le<std::uint64_t>(meta.config_hash);
  w.le<std::uint64_t>(params.size());
  for (const auto& [name, t] : params) {
    w.str(name);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.le<std::uint64_t>(d);
    for (double v : t.values()) w.le<double>(v);
  }
  if (!out.flush()) throw IoError("write failed: " + path);
}

ParamSet read_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Reader r(in, path);
  char magic[4];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("not a checkpoint (bad magic)");
  const auto version = r.le<std::uint32_t>();
  if (version != kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  CheckpointMeta m;
  m.run_id = r.str();
  m.round = r.le<std::uint64_t>();
  m.config_hash = r.le<std::uint64_t>();
  const auto count = r.le<std::uint64_t>();
  ParamSet params;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto rank = r.le<std::uint32_t>();
    if (rank == 0 || rank > kMaxRank) r.fail("bad rank for " + name);
    Tensor::Shape shape(rank);
    std::uint64_t size = 1;
    for (auto& d : shape) {
      d = r.le<std::uint64_t>();
      if (d == 0 || size > (std::uint64_t{1} << 32) / d) r.fail("bad shape for " + name);
      size *= d;
    }
    std::vector<double> values(size);
    for (double& v : values) v = r.le<double>();
    if (!params.emplace(std::move(name), Tensor(std::move(shape), std::move(values))).second) {
      r.fail("duplicate parameter");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
  if (meta) *meta = m;
  return params;
}

}  // namespace rolefed
