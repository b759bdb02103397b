#pragma once

#include <cstdint>
#include <vector>

#include "bevbench/errors.hpp"

namespace bevbench {

using ClassId = std::uint8_t;

// Dense H×W map of class ids, row-major.
struct LabelMap {
  int h = 0;
  int w = 0;
  std::vector<ClassId> v;

  LabelMap() = default;
  LabelMap(int h_, int w_, ClassId fill = 0) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

  ClassId& at(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
  ClassId at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
  std::size_t size() const { return v.size(); }

  bool operator==(const LabelMap& o) const { return h == o.h && w == o.w && v == o.v; }
};

// H×W boolean mask, row-major (visibility maps and friends).
struct BoolMap {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> v;

  BoolMap() = default;
  BoolMap(int h_, int w_, bool fill = false)
      : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill ? 1 : 0) {}

  void set(int r, int c, bool b) { v[static_cast<std::size_t>(r) * w + c] = b ? 1 : 0; }
  bool at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c] != 0; }
  std::size_t size() const { return v.size(); }

  bool operator==(const BoolMap& o) const { return h == o.h && w == o.w && v == o.v; }
};

}  // namespace bevbench
