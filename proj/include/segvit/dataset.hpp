#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segvit/config.hpp"
#include "segvit/label_map.hpp"
#include "segvit/params.hpp"

namespace segvit {

struct Image {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> rgb;  // interleaved, row-major

  bool operator==(const Image&) const = default;
};

// Binary portable pixmap (P6) and graymap (P5), maxval 255.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_pgm(const std::filesystem::path& path);

enum class ShapeKind { kRectangle, kCircle, kTriangle };

struct Shape2D {
  ShapeKind kind = ShapeKind::kRectangle;
  uint8_t label = 1;
  std::array<uint8_t, 3> color{};
  // Rectangle: [x0, x1) x [y0, y1). Circle: centre (x0, y0), radius r.
  // Triangle: vertices (x0, y1), (x1, y1), ((x0 + x1) / 2, y0).
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0, r = 0;
};

struct Scene {
  int64_t height = 0;
  int64_t width = 0;
  std::array<uint8_t, 3> background{};
  std::vector<Shape2D> shapes;  // painted in order; later shapes cover earlier ones
  uint64_t noise_seed = 0;
};

// Shape kind and colour for foreground class c >= 1.
ShapeKind shape_kind_for_class(int64_t c);
std::array<uint8_t, 3> base_color_for_class(int64_t c);

bool shape_contains(const Shape2D& shape, double x, double y);

Scene random_scene(Rng& rng, const DataConfig& data, int64_t height, int64_t width);

struct Sample {
  Image image;
  LabelMap labels;
};

// Labels follow the painter's order at pixel centres; noise is added to the
// image only.
Sample render(const Scene& scene, double noise);

// Sample i of a split is a pure function of (seed, split, i).
Sample make_sample(const DataConfig& data, int64_t height, int64_t width, const std::string& split,
                   int64_t index);

// Writes <dir>/{train,eval}/NNNNNN.{ppm,pgm} and <dir>/dataset.cfg.
void generate_dataset(const std::filesystem::path& dir, const SegVitConfig& config);

std::vector<Sample> load_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace segvit
