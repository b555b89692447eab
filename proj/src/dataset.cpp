#include "segvit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "segvit/errors.hpp"

namespace segvit {

namespace fs = std::filesystem;

namespace {

void write_pnm(const fs::path& path, const char* magic, int64_t w, int64_t h,
               const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<uint8_t> read_pnm(const fs::path& path, const std::string& magic, int64_t channels,
                              int64_t& w, int64_t& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string m;
  in >> m;
  if (m != magic) throw DataError(path.string() + ": expected " + magic + " header");
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    int64_t v = 0;
    if (!(in >> v)) throw DataError(path.string() + ": malformed header");
    return v;
  };
  w = next_int();
  h = next_int();
  const int64_t maxval = next_int();
  if (maxval != 255 || w <= 0 || h <= 0) throw DataError(path.string() + ": unsupported header");
  in.get();
  std::vector<uint8_t> bytes(static_cast<size_t>(w * h * channels));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DataError(path.string() + ": truncated pixel data");
  }
  return bytes;
}

// Edge function: positive when (px, py) is left of a->b in image coordinates.
double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

uint8_t clamp_byte(double v) { return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

void write_ppm(const fs::path& path, const Image& image) {
  write_pnm(path, "P6", image.width, image.height, image.rgb);
}

Image read_ppm(const fs::path& path) {
  Image img;
  img.rgb = read_pnm(path, "P6", 3, img.width, img.height);
  return img;
}

void write_pgm(const fs::path& path, const LabelMap& labels) {
  write_pnm(path, "P5", labels.width, labels.height, labels.labels);
}

LabelMap read_pgm(const fs::path& path) {
  LabelMap m;
  m.labels = read_pnm(path, "P5", 1, m.width, m.height);
  return m;
}

ShapeKind shape_kind_for_class(int64_t c) {
  switch ((c - 1) % 3) {
    case 0:
      return ShapeKind::kRectangle;
    case 1:
      return ShapeKind::kCircle;
    default:
      return ShapeKind::kTriangle;
  }
}

std::array<uint8_t, 3> base_color_for_class(int64_t c) {
  static constexpr std::array<std::array<uint8_t, 3>, 8> kPalette = {{
      {220, 50, 50},
      {50, 200, 70},
      {60, 80, 230},
      {230, 210, 40},
      {200, 60, 200},
      {40, 200, 210},
      {240, 140, 30},
      {150, 90, 40},
  }};
  return kPalette[static_cast<size_t>((c - 1) % static_cast<int64_t>(kPalette.size()))];
}

bool shape_contains(const Shape2D& s, double x, double y) {
  switch (s.kind) {
    case ShapeKind::kRectangle:
      return x >= s.x0 && x < s.x1 && y >= s.y0 && y < s.y1;
    case ShapeKind::kCircle:
      return (x - s.x0) * (x - s.x0) + (y - s.y0) * (y - s.y0) <= s.r * s.r;
    case ShapeKind::kTriangle: {
      const double ax = s.x0, ay = s.y1, bx = s.x1, by = s.y1, cx = 0.5 * (s.x0 + s.x1), cy = s.y0;
      const double e0 = edge(ax, ay, bx, by, x, y);
      const double e1 = edge(bx, by, cx, cy, x, y);
      const double e2 = edge(cx, cy, ax, ay, x, y);
      return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
  }
  return false;
}

Scene random_scene(Rng& rng, const DataConfig& data, int64_t height, int64_t width) {
  Scene scene;
  scene.height = height;
  scene.width = width;
  std::uniform_int_distribution<int> jitter_bg(-25, 25);
  for (auto& ch : scene.background) ch = static_cast<uint8_t>(110 + jitter_bg(rng));

  std::uniform_int_distribution<int64_t> count(data.min_shapes, data.max_shapes);
  std::uniform_int_distribution<int64_t> cls(1, data.classes - 1);
  std::uniform_int_distribution<int64_t> size(data.min_size, data.max_size);
  std::uniform_int_distribution<int> jitter(-12, 12);
  const int64_t n = data.classes > 1 ? count(rng) : 0;
  for (int64_t i = 0; i < n; ++i) {
    Shape2D s;
    const int64_t c = cls(rng);
    s.label = static_cast<uint8_t>(c);
    s.kind = shape_kind_for_class(c);
    const auto base = base_color_for_class(c);
    for (size_t k = 0; k < 3; ++k) s.color[k] = clamp_byte(base[k] + jitter(rng));
    const int64_t sw = size(rng);
    const int64_t sh = s.kind == ShapeKind::kCircle ? sw : size(rng);
    std::uniform_int_distribution<int64_t> px(0, width - sw);
    std::uniform_int_distribution<int64_t> py(0, height - sh);
    const double left = static_cast<double>(px(rng));
    const double top = static_cast<double>(py(rng));
    if (s.kind == ShapeKind::kCircle) {
      s.r = 0.5 * static_cast<double>(sw);
      s.x0 = left + s.r;
      s.y0 = top + s.r;
    } else {
      s.x0 = left;
      s.y0 = top;
      s.x1 = left + static_cast<double>(sw);
      s.y1 = top + static_cast<double>(sh);
    }
    scene.shapes.push_back(s);
  }
  scene.noise_seed = rng();
  return scene;
}

Sample render(const Scene& scene, double noise) {
  Sample out;
  out.image.height = scene.height;
  out.image.width = scene.width;
  out.image.rgb.resize(static_cast<size_t>(scene.height * scene.width * 3));
  out.labels = LabelMap(scene.height, scene.width, 0);
  Rng rng(scene.noise_seed);
  std::normal_distribution<double> gauss(0.0, noise * 255.0);
  for (int64_t y = 0; y < scene.height; ++y) {
    for (int64_t x = 0; x < scene.width; ++x) {
      std::array<uint8_t, 3> color = scene.background;
      uint8_t label = 0;
      for (const auto& s : scene.shapes) {
        if (shape_contains(s, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
          color = s.color;
          label = s.label;
        }
      }
      out.labels.at(y, x) = label;
      for (size_t k = 0; k < 3; ++k) {
        const double v = color[k] + (noise > 0 ? gauss(rng) : 0.0);
        out.image.rgb[static_cast<size_t>((y * scene.width + x) * 3) + k] = clamp_byte(v);
      }
    }
  }
  return out;
}

Sample make_sample(const DataConfig& data, int64_t height, int64_t width, const std::string& split,
                   int64_t index) {
  const uint32_t split_id = split == "train" ? 1u : split == "eval" ? 2u : 3u;
  std::seed_seq seq{static_cast<uint32_t>(data.seed), static_cast<uint32_t>(data.seed >> 32),
                    split_id, static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32)};
  Rng rng(seq);
  return render(random_scene(rng, data, height, width), data.noise);
}

void generate_dataset(const fs::path& dir, const SegVitConfig& config) {
  config.validate();
  const int64_t h = config.model.encoder.image_height;
  const int64_t w = config.model.encoder.image_width;
  std::error_code ec;
  for (const char* split : {"train", "eval"}) {
    fs::create_directories(dir / split, ec);
    if (ec) throw IoError("cannot create " + (dir / split).string() + ": " + ec.message());
  }
  {
    std::ofstream meta(dir / "dataset.cfg");
    if (!meta) throw IoError("cannot write " + (dir / "dataset.cfg").string());
    meta << config.serialize();
  }
  auto emit = [&](const std::string& split, int64_t count) {
    for (int64_t i = 0; i < count; ++i) {
      const Sample s = make_sample(config.data, h, w, split, i);
      char stem[32];
      std::snprintf(stem, sizeof stem, "%06lld", static_cast<long long>(i));
      write_ppm(dir / split / (std::string(stem) + ".ppm"), s.image);
      write_pgm(dir / split / (std::string(stem) + ".pgm"), s.labels);
    }
  };
  emit("train", config.data.train_count);
  emit("eval", config.data.eval_count);
}

std::vector<Sample> load_split(const fs::path& dir, const std::string& split) {
  const fs::path root = dir / split;
  if (!fs::is_directory(root)) throw IoError("missing dataset split directory " + root.string());
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.path().extension() == ".ppm") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  std::vector<Sample> out;
  out.reserve(images.size());
  for (const auto& p : images) {
    Sample s;
    s.image = read_ppm(p);
    auto label_path = p;
    label_path.replace_extension(".pgm");
    s.labels = read_pgm(label_path);
    if (s.labels.height != s.image.height || s.labels.width != s.image.width) {
      throw DataError(label_path.string() + ": label map size differs from its image");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace segvit
