// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mcse {

// Versioned little-endian binary container: scalar metadata plus named
// row-major double arrays. Layout is documented in docs/formats.md.
struct Checkpoint {
  std::string kind;                          // e.g. "vae", "ego-mnmf"
  std::map<std::string, double> meta;        // scalar fields
  struct Array {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;                // row-major
  };
  std::map<std::string, Array> arrays;

  double meta_at(const std::string& key) const;
  const Array& array_at(const std::string& name) const;

  void set_array(const std::string& name, std::vector<std::uint64_t> dims,
                 std::vector<double> data);
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mcse
