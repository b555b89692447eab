#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "segvit/checkpoint.hpp"
#include "segvit/config.hpp"
#include "segvit/dataset.hpp"
#include "segvit/errors.hpp"
#include "segvit/trainer.hpp"

using namespace segvit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("segvit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

SegVitConfig small_config() {
  auto c = SegVitConfig::parse(R"(
encoder.image_height = 16
encoder.image_width = 16
encoder.patch_size = 4
encoder.depth = 2
encoder.width = 16
encoder.heads = 2
decoder.cascade_layers = 1,2
data.classes = 3
data.train_count = 16
data.eval_count = 8
data.min_size = 4
data.max_size = 8
train.lr = 1e-3
train.batch_size = 2
train.iterations = 20
train.log_every = 5
)");
  c.validate();
  return c;
}

std::vector<Sample> samples(const SegVitConfig& c, const std::string& split, int64_t n) {
  std::vector<Sample> out;
  const auto& e = c.model.encoder;
  for (int64_t i = 0; i < n; ++i) out.push_back(make_sample(c.data, e.image_height, e.image_width, split, i));
  return out;
}

// Per-pixel label from the shape list, written without the library's
// geometry helpers.
uint8_t label_at(const Scene& s, double x, double y) {
  uint8_t label = 0;
  for (const auto& sh : s.shapes) {
    bool in = false;
    switch (sh.kind) {
      case ShapeKind::kRectangle:
        in = sh.x0 <= x && x < sh.x1 && sh.y0 <= y && y < sh.y1;
        break;
      case ShapeKind::kCircle: {
        const double dx = x - sh.x0, dy = y - sh.y0;
        in = std::sqrt(dx * dx + dy * dy) <= sh.r;
        break;
      }
      case ShapeKind::kTriangle: {
        // apex at the top centre, base along y1
        const double half = 0.5 * (sh.x1 - sh.x0);
        const double cx = sh.x0 + half;
        in = y >= sh.y0 && y <= sh.y1 && std::abs(x - cx) * (sh.y1 - sh.y0) <= half * (y - sh.y0);
        break;
      }
    }
    if (in) label = sh.label;
  }
  return label;
}

}  // namespace

TEST_CASE("config text") {
  const auto c = small_config();
  CHECK(SegVitConfig::parse(c.serialize()).serialize() == c.serialize());
  CHECK(c.get("encoder.width") == "16");
  CHECK(c.model.decoder.cascade_layers == std::vector<int>{1, 2});
  CHECK(c.model.decoder.num_classes == 3);

  try {
    SegVitConfig::parse("encoder.depth = 4\nencoder.colour = 3\n", "x.cfg");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
    CHECK(std::string(e.what()).find("encoder.colour") != std::string::npos);
  }
  CHECK_THROWS_AS(SegVitConfig::parse("encoder.depth = four\n"), ConfigError);
  CHECK_THROWS_AS(SegVitConfig::parse("just words\n"), ConfigError);
  CHECK_THROWS_AS(SegVitConfig::load("/nonexistent/segvit.cfg"), IoError);

  auto bad = c;
  bad.set("shrunk.mode", "full");
  bad.set("shrunk.qd_layer", "3");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("synthetic scenes") {
  const auto c = small_config();

  SUBCASE("same seed, same bytes") {
    TempDir a, b;
    generate_dataset(a.path, c);
    generate_dataset(b.path, c);
    int files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a.path)) {
      if (!entry.is_regular_file()) continue;
      ++files;
      const auto rel = fs::relative(entry.path(), a.path);
      CHECK(slurp(entry.path()) == slurp(b.path / rel));
    }
    CHECK(files == 1 + 2 * (16 + 8));
    const auto train = load_split(a.path, "train");
    REQUIRE(train.size() == 16);
    CHECK(train[3].image == make_sample(c.data, 16, 16, "train", 3).image);
    CHECK(train[3].labels == make_sample(c.data, 16, 16, "train", 3).labels);
  }

  SUBCASE("different splits and seeds differ") {
    CHECK_FALSE(make_sample(c.data, 16, 16, "train", 0).image == make_sample(c.data, 16, 16, "eval", 0).image);
    auto d = c.data;
    d.seed += 1;
    CHECK_FALSE(make_sample(c.data, 16, 16, "train", 0).image == make_sample(d, 16, 16, "train", 0).image);
  }

  SUBCASE("labels follow the shape geometry") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      const Scene s = random_scene(rng, c.data, 16, 16);
      const Sample out = render(s, 0.0);
      for (int64_t y = 0; y < 16; ++y)
        for (int64_t x = 0; x < 16; ++x) {
          REQUIRE(out.labels.at(y, x) == label_at(s, x + 0.5, y + 0.5));
        }
      for (const auto& sh : s.shapes) {
        CHECK(sh.label >= 1);
        CHECK(sh.label < 3);
        CHECK(sh.kind == shape_kind_for_class(sh.label));
      }
    }
  }

  SUBCASE("hand-placed rectangle") {
    Scene s;
    s.height = 4;
    s.width = 6;
    Shape2D r;
    r.label = 2;
    r.x0 = 2;
    r.x1 = 5;
    r.y0 = 1;
    r.y1 = 3;
    s.shapes.push_back(r);
    const auto out = render(s, 0.0);
    const std::vector<uint8_t> want = {0, 0, 0, 0, 0, 0,  //
                                       0, 0, 2, 2, 2, 0,  //
                                       0, 0, 2, 2, 2, 0,  //
                                       0, 0, 0, 0, 0, 0};
    CHECK(out.labels.labels == want);
  }

  SUBCASE("two classes use only background and one shape class") {
    auto d = c.data;
    d.classes = 2;
    for (int i = 0; i < 10; ++i) {
      for (uint8_t v : make_sample(d, 16, 16, "train", i).labels.labels) CHECK(v <= 1);
    }
    d.min_shapes = 0;
    d.max_shapes = 0;
    for (uint8_t v : make_sample(d, 16, 16, "train", 0).labels.labels) CHECK(v == 0);
  }

  SUBCASE("image files") {
    TempDir t;
    const auto s = make_sample(c.data, 16, 16, "train", 1);
    write_ppm(t.path / "a.ppm", s.image);
    write_pgm(t.path / "a.pgm", s.labels);
    CHECK(read_ppm(t.path / "a.ppm") == s.image);
    CHECK(read_pgm(t.path / "a.pgm") == s.labels);
    std::ofstream(t.path / "bad.ppm") << "P3\n1 1\n255\n0 0 0\n";
    CHECK_THROWS_AS(read_ppm(t.path / "bad.ppm"), DataError);
    CHECK_THROWS_AS(read_ppm(t.path / "missing.ppm"), IoError);
  }

  SUBCASE("unwritable output") {
    TempDir t;
    std::ofstream(t.path / "file") << "x";
    CHECK_THROWS_AS(generate_dataset(t.path / "file" / "sub", c), IoError);
  }
}

TEST_CASE("learning-rate schedule and batches") {
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.iterations = 100;
  CHECK(learning_rate(tc, 50) == 1e-3);
  tc.schedule = "poly";
  CHECK(learning_rate(tc, 0) == 1e-3);
  CHECK(learning_rate(tc, 50) == doctest::Approx(1e-3 * std::pow(0.5, 0.9)).epsilon(1e-12));
  tc.warmup = 10;
  CHECK(learning_rate(tc, 4) < learning_rate(tc, 9));

  CHECK(batch_indices(3, 7, 4, 10) == batch_indices(3, 7, 4, 10));
  CHECK(batch_indices(3, 7, 4, 10) != batch_indices(3, 8, 4, 10));
  for (int64_t i : batch_indices(1, 1, 32, 5)) {
    CHECK(i >= 0);
    CHECK(i < 5);
  }
  CHECK_THROWS_AS(batch_indices(0, 0, 2, 0), DataError);
}

TEST_CASE("training") {
  const auto c = small_config();
  const auto train = samples(c, "train", 16);

  SUBCASE("zero learning rate leaves the parameters alone") {
    auto z = c;
    z.train.lr = 0;
    Trainer t(z);
    const auto before = capture(t.model().params());
    const auto stats = t.step(train);
    CHECK(stats.grad_norm > 0);
    CHECK(capture(t.model().params()) == before);
  }

  SUBCASE("loss goes down") {
    double first = 0, later = 0;
    for (uint64_t seed = 0; seed < 3; ++seed) {
      auto s = c;
      s.train.seed = seed;
      s.train.iterations = 201;
      Trainer t(s);
      for (int64_t i = 0; i <= 200; ++i) {
        const auto stats = t.step(train);
        if (i == 0) first += stats.loss;
        if (i == 200) later += stats.loss;
      }
    }
    MESSAGE("mean loss at iteration 0: " << first / 3 << ", at 200: " << later / 3);
    CHECK(later < first);
  }

  SUBCASE("resuming reproduces an uninterrupted run") {
    TempDir d;
    std::ostringstream straight_log;
    Trainer straight(c);
    straight.run(train, straight_log);
    write_checkpoint(d.path / "straight.ckpt", straight.checkpoint());

    std::ostringstream resumed_log;
    Trainer first(c);
    first.run(train, resumed_log, 10);
    write_checkpoint(d.path / "half.ckpt", first.checkpoint());
    Trainer second(c, read_checkpoint(d.path / "half.ckpt"));
    CHECK(second.iteration() == 10);
    second.run(train, resumed_log);
    write_checkpoint(d.path / "resumed.ckpt", second.checkpoint());

    CHECK(resumed_log.str() == straight_log.str());
    CHECK(slurp(d.path / "resumed.ckpt") == slurp(d.path / "straight.ckpt"));
    const std::string log = straight_log.str();
    CHECK(std::count(log.begin(), log.end(), '\n') == 5);
  }

  SUBCASE("non-finite values name the iteration") {
    Trainer t(c);
    t.step(train);
    t.model().params().all()[0].tensor.mutable_data()[0] = std::numeric_limits<float>::quiet_NaN();
    try {
      t.step(train);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
    }
  }
}

TEST_CASE("checkpoints") {
  const auto c = small_config();
  Trainer t(c);
  t.step(samples(c, "train", 4));
  const Checkpoint ck = t.checkpoint();
  TempDir d;
  const auto path = d.path / "a.ckpt";
  write_checkpoint(path, ck);

  SUBCASE("round trip is exact") {
    const Checkpoint back = read_checkpoint(path);
    CHECK(back == ck);
    write_checkpoint(d.path / "b.ckpt", back);
    CHECK(slurp(d.path / "b.ckpt") == slurp(path));
    const auto model = load_model(back);
    CHECK(capture(model.params()) == ck.params);
  }

  SUBCASE("truncated and foreign files") {
    const auto bytes = slurp(path);
    for (size_t cut : {size_t{4}, bytes.size() / 2, bytes.size() - 1}) {
      std::ofstream(d.path / "cut.ckpt", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(cut));
      CHECK_THROWS_AS(read_checkpoint(d.path / "cut.ckpt"), DataError);
    }
    std::ofstream(d.path / "long.ckpt", std::ios::binary) << bytes << "x";
    CHECK_THROWS_AS(read_checkpoint(d.path / "long.ckpt"), DataError);
    std::ofstream(d.path / "other.ckpt", std::ios::binary) << "NOTACKPTxxxxxxxxxxxxxxxx";
    CHECK_THROWS_AS(read_checkpoint(d.path / "other.ckpt"), DataError);
    CHECK_THROWS_AS(read_checkpoint(d.path / "missing.ckpt"), IoError);
  }

  SUBCASE("architecture mismatch is rejected") {
    auto wider = c;
    wider.set("encoder.width", "32");
    CHECK_THROWS_AS(Trainer(wider, ck), ConfigError);
    SegVitModel<float> other(wider.model, 0);
    CHECK_THROWS_AS(restore(ck.params, other.params()), ConfigError);
  }
}
