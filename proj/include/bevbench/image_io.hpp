#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevbench/label_map.hpp"

namespace bevbench {

// Binary netpbm I/O. Grayscale 8-bit carries class-id maps, grayscale 16-bit
// (big-endian, per the PGM convention) carries millimeter depth, P6 carries
// RGB renders. Readers throw FormatError with the offending byte offset.

void write_pgm8(const std::string& path, int h, int w, const std::uint8_t* data);
void write_pgm16(const std::string& path, int h, int w, const std::uint16_t* data);
void write_ppm(const std::string& path, int h, int w, const std::uint8_t* rgb);

struct Image8 {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;
};
struct Image16 {
  int h = 0, w = 0;
  std::vector<std::uint16_t> v;
};
struct ImageRgb {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;  // interleaved
};

Image8 read_pgm8(const std::string& path);
Image16 read_pgm16(const std::string& path);
ImageRgb read_ppm(const std::string& path);

void write_label_map(const std::string& path, const LabelMap& m);
LabelMap read_label_map(const std::string& path);

void write_bool_map(const std::string& path, const BoolMap& m);  // 0 / 255
BoolMap read_bool_map(const std::string& path);

// Depth in meters <-> 16-bit millimeters (clamped to the u16 range).
void write_depth(const std::string& path, int h, int w, const std::vector<double>& meters);
std::vector<double> read_depth(const std::string& path, int& h, int& w);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace bevbench
