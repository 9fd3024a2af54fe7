// speechchain/params.hpp
//
// Named parameter collections for one model, with a versioned binary
// checkpoint format. Layout (all integers little-endian):
//
//   magic            8 bytes  "SPCHCKPT"
//   format version   u32      currently 1
//   model tag        u32 length + UTF-8 bytes
//   entry count      u64
//   per entry:       u32 name length + name bytes,
//                    u32 ndim, ndim x u64 extents,
//                    numel x f64 row-major values
//
// Saving, loading, and saving again produces byte-identical files.

// Copyright 2026  speechchain authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPEECHCHAIN_PARAMS_HPP
#define SPEECHCHAIN_PARAMS_HPP

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "speechchain/errors.hpp"
#include "speechchain/rng.hpp"
#include "speechchain/tensor.hpp"

namespace speechchain {

class ModelParameters {
 public:
  explicit ModelParameters(std::string version_tag = "v1")
      : version_tag_(std::move(version_tag)) {}

  ad::Tensor& add(const std::string& name, ad::Tensor tensor) {
    if (index_.count(name))
      throw ConfigError("parameter '" + name + "' registered twice");
    tensor.set_requires_grad(true);
    index_[name] = entries_.size();
    entries_.emplace_back(name, std::move(tensor));
    return entries_.back().second;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  ad::Tensor& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw ConfigError("unknown parameter '" + name + "'");
    return entries_[it->second].second;
  }
  const ad::Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw ConfigError("unknown parameter '" + name + "'");
    return entries_[it->second].second;
  }

  // Registration-ordered view; iteration order is deterministic.
  const std::vector<std::pair<std::string, ad::Tensor>>& entries() const {
    return entries_;
  }
  std::vector<std::pair<std::string, ad::Tensor>>& entries() {
    return entries_;
  }

  size_t size() const { return entries_.size(); }
  const std::string& version_tag() const { return version_tag_; }

  int64_t total_values() const {
    int64_t n = 0;
    for (const auto& [name, t] : entries_) n += t.numel();
    return n;
  }

  void clear_grads() {
    for (auto& [name, t] : entries_) t.clear_grad();
  }

  // Deep copy (fresh leaves, same names/order) for snapshot/restore.
  ModelParameters clone() const {
    ModelParameters out(version_tag_);
    for (const auto& [name, t] : entries_) out.add(name, t.deep_copy());
    return out;
  }

  void copy_values_from(const ModelParameters& other) {
    if (other.size() != size())
      throw ConfigError("parameter collections differ in size");
    for (size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].first != other.entries_[i].first)
        throw ConfigError("parameter name mismatch at position " +
                          std::to_string(i));
      entries_[i].second.mutable_values() = other.entries_[i].second.values();
    }
  }

 private:
  std::string version_tag_;
  std::vector<std::pair<std::string, ad::Tensor>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// --- Initializers ------------------------------------------------------------

// Weight matrices: uniform in +-sqrt(1 / fan_in).
inline ad::Tensor init_weight(ad::Shape shape, int64_t fan_in, Rng& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<double> v(static_cast<size_t>(ad::shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return ad::Tensor::from_vector(std::move(shape), std::move(v));
}

inline ad::Tensor init_zeros(ad::Shape shape) {
  return ad::Tensor::zeros(std::move(shape));
}

// Embedding tables: normal(0, 0.1).
inline ad::Tensor init_embedding(ad::Shape shape, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(ad::shape_numel(shape)));
  for (auto& x : v) x = rng.normal(0.0, 0.1);
  return ad::Tensor::from_vector(std::move(shape), std::move(v));
}

// --- Checkpoint I/O ----------------------------------------------------------

namespace ckpt {

constexpr char kMagic[8] = {'S', 'P', 'C', 'H', 'C', 'K', 'P', 'T'};
constexpr uint32_t kFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void put_f64(std::ostream& os, double v) {
  put_u64(os, std::bit_cast<uint64_t>(v));
}

inline uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataError("checkpoint truncated while reading " + what);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline uint64_t get_u64(std::istream& is, const std::string& what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw DataError("checkpoint truncated while reading " + what);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(get_u64(is, what));
}

inline std::string get_string(std::istream& is, const std::string& what) {
  uint32_t len = get_u32(is, what + " length");
  std::string s(len, '\0');
  if (len && !is.read(s.data(), len))
    throw DataError("checkpoint truncated while reading " + what);
  return s;
}

}  // namespace detail

inline void save(const ModelParameters& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  detail::put_u32(os, kFormatVersion);
  detail::put_u32(os, static_cast<uint32_t>(params.version_tag().size()));
  os.write(params.version_tag().data(),
           static_cast<std::streamsize>(params.version_tag().size()));
  detail::put_u64(os, params.size());
  for (const auto& [name, t] : params.entries()) {
    detail::put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, static_cast<uint32_t>(t.shape().size()));
    for (int64_t d : t.shape()) detail::put_u64(os, static_cast<uint64_t>(d));
    for (double v : t.values()) detail::put_f64(os, v);
  }
  if (!os) throw DataError("write failed for checkpoint: " + path);
}

struct LoadedCheckpoint {
  std::string version_tag;
  std::vector<std::pair<std::string, ad::Tensor>> entries;
};

inline LoadedCheckpoint load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kMagic))
    throw DataError("not a checkpoint file (bad magic): " + path);
  uint32_t version = detail::get_u32(is, "format version");
  if (version != kFormatVersion)
    throw DataError("unsupported checkpoint format version " +
                    std::to_string(version) + " in " + path);
  LoadedCheckpoint out;
  out.version_tag = detail::get_string(is, "model tag");
  uint64_t count = detail::get_u64(is, "entry count");
  out.entries.reserve(count);
  for (uint64_t e = 0; e < count; ++e) {
    std::string name = detail::get_string(is, "parameter name");
    uint32_t ndim = detail::get_u32(is, name + " ndim");
    ad::Shape shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d)
      shape[d] =
          static_cast<int64_t>(detail::get_u64(is, name + " extent"));
    std::vector<double> values(
        static_cast<size_t>(ad::shape_numel(shape)));
    for (auto& v : values) v = detail::get_f64(is, name + " values");
    out.entries.emplace_back(
        name, ad::Tensor::from_vector(std::move(shape), std::move(values)));
  }
  return out;
}

struct RestoreReport {
  std::vector<std::string> loaded;
  std::vector<std::string> missing_in_file;   // wanted by model, absent
  std::vector<std::string> extra_in_file;     // in file, unknown to model
};

// Copy checkpoint values into an existing collection. With allow_partial the
// intersection is loaded and the report lists the rest; otherwise any
// mismatch is an error naming every offending parameter.
inline RestoreReport restore(ModelParameters& params, const std::string& path,
                             bool allow_partial = false) {
  LoadedCheckpoint file = load(path);
  RestoreReport report;
  std::unordered_map<std::string, const ad::Tensor*> by_name;
  for (const auto& [name, t] : file.entries) by_name[name] = &t;

  for (auto& [name, t] : params.entries()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      report.missing_in_file.push_back(name);
      continue;
    }
    if (it->second->shape() != t.shape())
      throw DataError("checkpoint shape mismatch for '" + name + "': file " +
                      ad::shape_str(it->second->shape()) + " vs model " +
                      ad::shape_str(t.shape()));
    t.mutable_values() = it->second->values();
    report.loaded.push_back(name);
    by_name.erase(it);
  }
  for (const auto& [name, t] : file.entries)
    if (by_name.count(name)) report.extra_in_file.push_back(name);

  if (!allow_partial &&
      (!report.missing_in_file.empty() || !report.extra_in_file.empty())) {
    std::string msg = "checkpoint/model parameter mismatch:";
    for (const auto& n : report.missing_in_file)
      msg += " missing-in-file " + n + ";";
    for (const auto& n : report.extra_in_file) msg += " extra-in-file " + n + ";";
    throw DataError(msg);
  }
  return report;
}

}  // namespace ckpt
}  // namespace speechchain

#endif  // SPEECHCHAIN_PARAMS_HPP
