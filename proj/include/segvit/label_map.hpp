#pragma once

#include <cstdint>
#include <vector>

namespace segvit {

inline constexpr uint8_t kIgnoreLabel = 255;

struct LabelMap {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> labels;  // row-major

  LabelMap() = default;
  LabelMap(int64_t h, int64_t w, uint8_t fill = 0)
      : height(h), width(w), labels(static_cast<size_t>(h * w), fill) {}

  uint8_t at(int64_t y, int64_t x) const { return labels[static_cast<size_t>(y * width + x)]; }
  uint8_t& at(int64_t y, int64_t x) { return labels[static_cast<size_t>(y * width + x)]; }
  bool operator==(const LabelMap&) const = default;
};

}  // namespace segvit
