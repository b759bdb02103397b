#include "bevbench/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bevbench {

namespace {

void write_bytes(const std::string& path, const std::string& header, const void* data,
                 std::size_t n) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!f) throw IoError("short write: " + path);
}

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    buf_ = ss.str();
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_ + ": " + what, pos_);
  }

  char peek() const {
    if (pos_ >= buf_.size()) fail("unexpected end of file");
    return buf_[pos_];
  }

  void skip_header_whitespace() {
    // Netpbm allows comments between header tokens.
    while (pos_ < buf_.size()) {
      const char c = buf_[pos_];
      if (c == '#') {
        while (pos_ < buf_.size() && buf_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int read_int() {
    skip_header_whitespace();
    if (pos_ >= buf_.size() || buf_[pos_] < '0' || buf_[pos_] > '9') fail("expected integer");
    long long v = 0;
    while (pos_ < buf_.size() && buf_[pos_] >= '0' && buf_[pos_] <= '9') {
      v = v * 10 + (buf_[pos_] - '0');
      if (v > 1 << 30) fail("integer out of range");
      ++pos_;
    }
    return static_cast<int>(v);
  }

  void expect_magic(const char* magic) {
    for (const char* m = magic; *m; ++m) {
      if (pos_ >= buf_.size() || buf_[pos_] != *m) fail(std::string("bad magic, expected ") + magic);
      ++pos_;
    }
  }

  // One whitespace byte separates the maxval from pixel data.
  void consume_raster_separator() {
    if (pos_ >= buf_.size()) fail("missing raster");
    const char c = buf_[pos_];
    if (c != ' ' && c != '\t' && c != '\r' && c != '\n') fail("expected whitespace before raster");
    ++pos_;
  }

  const std::uint8_t* raster(std::size_t n) {
    if (buf_.size() - pos_ < n) fail("raster truncated");
    const auto* p = reinterpret_cast<const std::uint8_t*>(buf_.data() + pos_);
    pos_ += n;
    return p;
  }

  void expect_eof() const {
    if (pos_ != buf_.size()) throw FormatError(path_ + ": trailing bytes after raster", pos_);
  }

 private:
  std::string path_;
  std::string buf_;
  std::size_t pos_ = 0;
};

std::string pnm_header(const char* magic, int w, int h, int maxval) {
  std::ostringstream os;
  os << magic << "\n" << w << " " << h << "\n" << maxval << "\n";
  return os.str();
}

}  // namespace

void write_pgm8(const std::string& path, int h, int w, const std::uint8_t* data) {
  write_bytes(path, pnm_header("P5", w, h, 255), data, static_cast<std::size_t>(h) * w);
}

void write_pgm16(const std::string& path, int h, int w, const std::uint16_t* data) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<std::uint8_t> be(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    be[2 * i] = static_cast<std::uint8_t>(data[i] >> 8);
    be[2 * i + 1] = static_cast<std::uint8_t>(data[i] & 0xff);
  }
  write_bytes(path, pnm_header("P5", w, h, 65535), be.data(), be.size());
}

void write_ppm(const std::string& path, int h, int w, const std::uint8_t* rgb) {
  write_bytes(path, pnm_header("P6", w, h, 255), rgb, static_cast<std::size_t>(h) * w * 3);
}

namespace {

template <typename Img>
Img read_gray(const std::string& path, int expect_maxval) {
  Reader r(path);
  r.expect_magic("P5");
  Img img;
  img.w = r.read_int();
  img.h = r.read_int();
  const int maxval = r.read_int();
  if (img.w <= 0 || img.h <= 0) r.fail("non-positive dimensions");
  if (maxval != expect_maxval) r.fail("unexpected maxval " + std::to_string(maxval));
  r.consume_raster_separator();
  const std::size_t n = static_cast<std::size_t>(img.h) * img.w;
  if constexpr (sizeof(img.v[0]) == 1) {
    const std::uint8_t* p = r.raster(n);
    img.v.assign(p, p + n);
  } else {
    const std::uint8_t* p = r.raster(n * 2);
    img.v.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      img.v[i] = static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
  }
  r.expect_eof();
  return img;
}

}  // namespace

Image8 read_pgm8(const std::string& path) { return read_gray<Image8>(path, 255); }

Image16 read_pgm16(const std::string& path) { return read_gray<Image16>(path, 65535); }

ImageRgb read_ppm(const std::string& path) {
  Reader r(path);
  r.expect_magic("P6");
  ImageRgb img;
  img.w = r.read_int();
  img.h = r.read_int();
  const int maxval = r.read_int();
  if (img.w <= 0 || img.h <= 0) r.fail("non-positive dimensions");
  if (maxval != 255) r.fail("unexpected maxval " + std::to_string(maxval));
  r.consume_raster_separator();
  const std::size_t n = static_cast<std::size_t>(img.h) * img.w * 3;
  const std::uint8_t* p = r.raster(n);
  img.v.assign(p, p + n);
  r.expect_eof();
  return img;
}

void write_label_map(const std::string& path, const LabelMap& m) {
  write_pgm8(path, m.h, m.w, m.v.data());
}

LabelMap read_label_map(const std::string& path) {
  Image8 img = read_pgm8(path);
  LabelMap m(img.h, img.w);
  m.v = std::move(img.v);
  return m;
}

void write_bool_map(const std::string& path, const BoolMap& m) {
  std::vector<std::uint8_t> bytes(m.v.size());
  for (std::size_t i = 0; i < m.v.size(); ++i) bytes[i] = m.v[i] ? 255 : 0;
  write_pgm8(path, m.h, m.w, bytes.data());
}

BoolMap read_bool_map(const std::string& path) {
  Image8 img = read_pgm8(path);
  BoolMap m(img.h, img.w);
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    if (img.v[i] != 0 && img.v[i] != 255)
      throw FormatError(path + ": mask byte is neither 0 nor 255", i);
    m.v[i] = img.v[i] ? 1 : 0;
  }
  return m;
}

void write_depth(const std::string& path, int h, int w, const std::vector<double>& meters) {
  std::vector<std::uint16_t> mm(meters.size());
  for (std::size_t i = 0; i < meters.size(); ++i) {
    const long long q = std::llround(meters[i] * 1000.0);
    mm[i] = static_cast<std::uint16_t>(q < 0 ? 0 : (q > 65535 ? 65535 : q));
  }
  write_pgm16(path, h, w, mm.data());
}

std::vector<double> read_depth(const std::string& path, int& h, int& w) {
  Image16 img = read_pgm16(path);
  h = img.h;
  w = img.w;
  std::vector<double> meters(img.v.size());
  for (std::size_t i = 0; i < img.v.size(); ++i) meters[i] = img.v[i] / 1000.0;
  return meters;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("short write: " + path);
}

}  // namespace bevbench
