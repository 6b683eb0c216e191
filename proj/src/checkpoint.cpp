// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mcse/common.hpp"

namespace mcse {

namespace {

constexpr char kMagic[8] = {'M', 'C', 'S', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  os.write(b, 8);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is) {
  char b[4];
  is.read(b, 4);
  if (!is) throw DataError("checkpoint: truncated file");
  std::uint32_t v;
  std::memcpy(&v, b, 4);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  char b[8];
  is.read(b, 8);
  if (!is) throw DataError("checkpoint: truncated file");
  std::uint64_t v;
  std::memcpy(&v, b, 8);
  return v;
}

std::string get_string(std::istream& is) {
  const std::uint32_t len = get_u32(is);
  if (len > (1u << 20)) throw DataError("checkpoint: implausible string length");
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw DataError("checkpoint: truncated file");
  return s;
}

}  // namespace

double Checkpoint::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint: missing meta key '" + key + "'");
  return it->second;
}

const Checkpoint::Array& Checkpoint::array_at(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw DataError("checkpoint: missing array '" + name + "'");
  return it->second;
}

void Checkpoint::set_array(const std::string& name, std::vector<std::uint64_t> dims,
                           std::vector<double> data) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  if (n != data.size())
    throw DataError("checkpoint: dims/data mismatch for array '" + name + "'");
  arrays[name] = Array{std::move(dims), std::move(data)};
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, 8);
  put_u32(os, kVersion);
  put_string(os, ckpt.kind);
  put_u32(os, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [key, value] : ckpt.meta) {
    put_string(os, key);
    char b[8];
    std::memcpy(b, &value, 8);
    os.write(b, 8);
  }
  put_u32(os, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, arr] : ckpt.arrays) {
    put_string(os, name);
    put_u32(os, static_cast<std::uint32_t>(arr.dims.size()));
    for (auto d : arr.dims) put_u64(os, d);
    os.write(reinterpret_cast<const char*>(arr.data.data()),
             static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
  }
  if (!os) throw DataError("checkpoint: short write to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("checkpoint: '" + path + "' is not an mcse checkpoint");
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.kind = get_string(is);
  const std::uint32_t n_meta = get_u32(is);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = get_string(is);
    char b[8];
    is.read(b, 8);
    if (!is) throw DataError("checkpoint: truncated file");
    double v;
    std::memcpy(&v, b, 8);
    ckpt.meta[key] = v;
  }
  const std::uint32_t n_arrays = get_u32(is);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    std::string name = get_string(is);
    const std::uint32_t ndim = get_u32(is);
    if (ndim > 8) throw DataError("checkpoint: implausible rank");
    Checkpoint::Array arr;
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      arr.dims.push_back(get_u64(is));
      count *= arr.dims.back();
    }
    if (count > (1ull << 30)) throw DataError("checkpoint: implausible array size");
    arr.data.resize(count);
    is.read(reinterpret_cast<char*>(arr.data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw DataError("checkpoint: truncated array '" + name + "'");
    ckpt.arrays[name] = std::move(arr);
  }
  return ckpt;
}

}  // namespace mcse
