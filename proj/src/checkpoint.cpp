#include "canopy/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace canopy {

namespace {

template <typename T>
void write_pod(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void TensorFile::put(const std::string& name, std::vector<int> shape,
                     std::vector<double> data) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  if (n != data.size())
    throw std::invalid_argument("tensor '" + name + "': shape/data mismatch");
  tensors[name] = Entry{std::move(shape), std::move(data)};
}

void TensorFile::put_scalar(const std::string& name, double v) {
  put(name, {1}, {v});
}

const TensorFile::Entry& TensorFile::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
  return it->second;
}

double TensorFile::get_scalar(const std::string& name) const {
  const Entry& e = get(name);
  if (e.data.size() != 1)
    throw std::runtime_error("checkpoint: '" + name + "' is not a scalar");
  return e.data[0];
}

void TensorFile::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  write_pod<std::uint32_t>(f, kMagic);
  write_pod<std::uint32_t>(f, kVersion);
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, e] : tensors) {
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(e.shape.size()));
    for (int d : e.shape) write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(d));
    f.write(reinterpret_cast<const char*>(e.data.data()),
            static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

TensorFile TensorFile::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  if (read_pod<std::uint32_t>(f) != kMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint32_t version = read_pod<std::uint32_t>(f);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  std::uint32_t count = read_pod<std::uint32_t>(f);
  TensorFile out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = read_pod<std::uint32_t>(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    std::uint32_t rank = read_pod<std::uint32_t>(f);
    std::vector<int> shape(rank);
    size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int>(read_pod<std::uint32_t>(f));
      n *= static_cast<size_t>(shape[d]);
    }
    std::vector<double> data(n);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: truncated tensor in " + path);
    out.tensors[name] = Entry{std::move(shape), std::move(data)};
  }
  return out;
}

}  // namespace canopy
