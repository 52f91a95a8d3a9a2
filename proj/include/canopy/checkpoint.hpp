#pragma once

#include <map>
#include <string>
#include <vector>

namespace canopy {

// Versioned named-tensor container: magic, format version, tensor count,
// then per tensor (name, rank, dims as u32, row-major f64 data), all
// little-endian.
struct TensorFile {
  struct Entry {
    std::vector<int> shape;
    std::vector<double> data;
  };
  std::map<std::string, Entry> tensors;

  void put(const std::string& name, std::vector<int> shape,
           std::vector<double> data);
  void put_scalar(const std::string& name, double v);
  const Entry& get(const std::string& name) const;  // throws if missing
  double get_scalar(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }

  void save(const std::string& path) const;
  static TensorFile load(const std::string& path);

  static constexpr std::uint32_t kMagic = 0x43505054;  // "TPPC" LE
  static constexpr std::uint32_t kVersion = 1;
};

}  // namespace canopy
