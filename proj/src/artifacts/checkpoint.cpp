/*
 * Copyright (c) 2026 The georoute Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>
#include <unordered_set>

#include "georoute/artifacts.hpp"

namespace georoute {

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'A', 'L', 'N'};
constexpr std::size_t kHeaderBytes = 8;
constexpr std::size_t kTrailerBytes = 8;

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint64_t bits;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  template <class T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw CheckpointTruncatedError(std::string("checkpoint truncated while reading ") + what);
    }
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += sizeof(T);
    if constexpr (std::is_same_v<T, double>) {
      return std::bit_cast<double>(bits);
    } else {
      return static_cast<T>(bits);
    }
  }

  std::string take_string(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw CheckpointTruncatedError("checkpoint truncated while reading a name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedArray> arrays) {
  std::unordered_set<std::string> seen;
  for (const auto& a : arrays) {
    if (a.name.empty()) throw PreconditionError("checkpoint: array names must be nonempty");
    if (!seen.insert(a.name).second) throw PreconditionError("checkpoint: duplicate array name '" + a.name + "'");
  }

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& a : arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out.insert(out.end(), a.name.begin(), a.name.end());
    const Shape& shape = a.array.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put<std::uint64_t>(out, d);
    for (double v : a.array.data()) put<double>(out, v);
  }
  put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

std::vector<NamedArray> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointMagicError("checkpoint: bad magic (expected \"GALN\")");
  }
  if (bytes.size() < kHeaderBytes + kTrailerBytes) {
    throw CheckpointTruncatedError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
  }
  const std::size_t body_end = bytes.size() - kTrailerBytes;
  const std::uint64_t stored = Reader(bytes, body_end).get<std::uint64_t>("checksum");
  if (stored != fnv1a64(bytes.first(body_end))) throw CheckpointChecksumError("checkpoint: checksum mismatch");

  Reader reader(bytes.first(body_end), 4);
  const auto version = reader.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint: format version " + std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
  }

  std::vector<NamedArray> out;
  while (reader.remaining() > 0) {
    const auto name_len = reader.get<std::uint32_t>("name length");
    std::string name = reader.take_string(name_len);
    const auto rank = reader.get<std::uint32_t>("rank");
    Shape shape;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = reader.get<std::uint64_t>("dimension");
      if (d == 0 || count > reader.remaining() / d) {
        throw CheckpointTruncatedError("checkpoint: array '" + name + "' extends past the end of the file");
      }
      count *= d;
      shape.push_back(static_cast<std::size_t>(d));
    }
    if (count > reader.remaining() / sizeof(double)) {
      throw CheckpointTruncatedError("checkpoint: array '" + name + "' extends past the end of the file");
    }
    std::vector<double> values(count);
    for (double& v : values) v = reader.get<double>("payload");
    out.push_back({std::move(name), Array::from(std::move(shape), std::move(values))});
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedArray> arrays) {
  const auto bytes = encode_checkpoint(arrays);
  write_text_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open checkpoint");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path, "read failed");
  return decode_checkpoint(bytes);
}

void restore_parameters(std::span<const NamedArray> params, std::span<const NamedArray> loaded) {
  std::unordered_map<std::string, const NamedArray*> by_name;
  for (const auto& e : loaded) {
    if (!by_name.emplace(e.name, &e).second) {
      throw CheckpointError("checkpoint: duplicate entry '" + e.name + "'");
    }
  }
  if (by_name.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(by_name.size()) + " arrays, model expects " +
                          std::to_string(params.size()));
  }
  // Validate everything before writing so a mismatch leaves the model untouched.
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw CheckpointError("checkpoint: missing parameter '" + p.name + "'");
    if (it->second->array.shape() != p.array.shape()) {
      throw CheckpointError("checkpoint: parameter '" + p.name + "' has shape " +
                            shape_to_string(it->second->array.shape()) + ", model expects " +
                            shape_to_string(p.array.shape()));
    }
  }
  for (const auto& p : params) {
    Array target = p.array;
    auto src = by_name.at(p.name)->array.data();
    std::copy(src.begin(), src.end(), target.mutable_data().begin());
  }
}

}  // namespace georoute
