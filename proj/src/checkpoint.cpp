#include "dicycle/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace dicycle {

namespace {

constexpr char kMagic[4] = {'D', 'C', 'Y', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  write_le(os, bits);
}

double read_f64(std::istream& is) {
  std::uint64_t bits = read_le<std::uint64_t>(is);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_le(os, kVersion);
  write_le(os, static_cast<std::uint64_t>(entries.size()));
  for (const auto& e : entries) {
    write_le(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_le(os, static_cast<std::uint32_t>(e.tensor->rank()));
    for (Index ext : e.tensor->shape) write_le(os, static_cast<std::uint64_t>(ext));
    for (Index i = 0; i < e.tensor->numel(); ++i) write_f64(os, e.tensor->data[i]);
  }
  if (!os) throw DataError("checkpoint: write to " + path + " failed");
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw SchemaError("checkpoint: bad magic in " + path);
  }
  const auto version = read_le<std::uint32_t>(is);
  if (version != kVersion) {
    throw SchemaError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = read_le<std::uint64_t>(is);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = read_le<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = read_le<std::uint32_t>(is);
    Shape shape(rank);
    for (auto& ext : shape) ext = static_cast<Index>(read_le<std::uint64_t>(is));
    auto t = Tensor::zeros(shape);
    for (Index i = 0; i < t->numel(); ++i) t->data[i] = read_f64(is);
    if (!is) throw SchemaError("checkpoint: truncated file " + path);
    out.push_back({std::move(name), std::move(t)});
  }
  return out;
}

void restore_into(const std::vector<NamedTensor>& loaded, std::vector<NamedTensor>& target) {
  std::unordered_map<std::string, const NamedTensor*> by_name;
  for (const auto& e : loaded) by_name[e.name] = &e;
  for (auto& t : target) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw SchemaError("checkpoint: missing entry '" + t.name + "'");
    const auto& src = *it->second->tensor;
    if (src.shape != t.tensor->shape) {
      throw SchemaError("checkpoint: entry '" + t.name + "' has shape " + shape_str(src.shape) +
                        ", expected " + shape_str(t.tensor->shape));
    }
    t.tensor->data = src.data;
  }
}

}  // namespace dicycle
