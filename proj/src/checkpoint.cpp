#include "bevbench/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace bevbench {

namespace {

constexpr char kMagic[8] = {'V', 'P', 'N', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

struct Reader {
  std::ifstream in;
  std::size_t offset = 0;

  explicit Reader(const std::string& path) : in(path, std::ios::binary) {
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  }

  void read(void* dst, std::size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw FormatError(std::string("truncated checkpoint while reading ") + what, offset);
    offset += n;
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    read(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  double f64(const char* what) {
    unsigned char b[8];
    read(b, 8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }

  bool at_eof() { return in.peek() == std::ifstream::traits_type::eof(); }
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const std::string& meta_json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(meta_json.size()));
  out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
  for (const auto& [name, e] : params.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(e.tensor.shape().size()));
    for (int d : e.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : e.tensor.values()) put_f64(out, v);
  }
  if (!out) throw IoError("write failed for checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.read(magic, 8, "magic");
  if (std::memcmp(magic, kMagic, 8) != 0) throw FormatError("bad checkpoint magic", 0);

  Checkpoint ckpt;
  const std::uint32_t meta_len = r.u32("meta length");
  ckpt.meta_json.resize(meta_len);
  if (meta_len > 0) r.read(ckpt.meta_json.data(), meta_len, "meta json");

  while (!r.at_eof()) {
    const std::uint32_t name_len = r.u32("name length");
    std::string name(name_len, '\0');
    r.read(name.data(), name_len, "name");
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw FormatError("implausible tensor rank", r.offset - 4);
    Shape shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<int>(r.u32("dim"));
      if (shape[i] <= 0) throw FormatError("non-positive dim", r.offset - 4);
      numel *= static_cast<std::size_t>(shape[i]);
    }
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) data[i] = r.f64("values");
    ckpt.params.emplace_back(std::move(name),
                             Tensor::from_data(std::move(shape), std::move(data)));
  }
  return ckpt;
}

void restore_params(ParamSet& params, const Checkpoint& ckpt) {
  if (ckpt.params.size() != params.size())
    throw ConfigError("checkpoint has " + std::to_string(ckpt.params.size()) +
                      " params, model expects " + std::to_string(params.size()));
  for (const auto& [name, tensor] : ckpt.params) {
    Tensor& dst = params.at(name);
    if (dst.shape() != tensor.shape())
      throw ConfigError("checkpoint shape mismatch for '" + name + "': " +
                        shape_str(tensor.shape()) + " vs " + shape_str(dst.shape()));
    std::copy(tensor.values().begin(), tensor.values().end(), dst.values().begin());
  }
}

}  // namespace bevbench
