#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "segvit/dataset.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(SEGVIT_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config(const std::string& name) { return std::string(SEGVIT_CONFIG_DIR) + "/" + name; }

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size()));
}

const char* kSmall =
    "-s encoder.image_height=16 -s encoder.image_width=16 -s encoder.depth=3 -s encoder.width=16 "
    "-s encoder.heads=2 -s decoder.cascade_layers=1,2,3 -s data.max_size=8 -s data.min_size=4";

}  // namespace

TEST_CASE("cli flops") {
  const auto r = run("flops -c " + config("vit_large_640.cfg") + " --kv");
  CHECK(r.code == 0);
  const double total = value_after(r.out, "\ntotal=") / 1e9;
  const double backbone = value_after(r.out, "backbone_total=") / 1e9;
  MESSAGE("total " << total << " backbone " << backbone);
  CHECK(std::abs(backbone - 612.3) / 612.3 < 0.02);
  CHECK(std::abs(total - 637.9) / 637.9 < 0.02);

  const auto cmp = run("flops -c " + config("vit_large_640.cfg") + " --compare " +
                       config("vit_large_640_shrunk.cfg"));
  CHECK(cmp.code == 0);
  CHECK(std::abs(value_after(cmp.out, "ratio=") - 373.5 / 637.9) < 0.0586);

  const auto crop = run("flops -c " + config("vit_base_512.cfg") + " --crop 256x256 --kv");
  CHECK(crop.code == 0);
  CHECK(crop.out.find("layer1.attn.qkv=") != std::string::npos);
}

TEST_CASE("cli gradcheck") {
  const auto r = run(std::string("gradcheck -c ") + config("toy.cfg") + " " + kSmall + " --mode all --samples 2");
  CHECK(r.code == 0);
  CHECK(r.out.find("gradcheck ok") != std::string::npos);
  CHECK(r.out.find("mode=full") != std::string::npos);
}

TEST_CASE("cli data, training, inference and evaluation") {
  const fs::path dir = fs::temp_directory_path() / ("segvit_cli_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const std::string small = std::string("-c ") + config("toy.cfg") + " " + kSmall +
                            " -s data.train_count=8 -s data.eval_count=4 -s train.iterations=4 "
                            "-s train.log_every=2 -s train.batch_size=2";

  REQUIRE(run("gen-data " + small + " -o " + (dir / "data").string()).code == 0);
  CHECK(fs::exists(dir / "data" / "eval" / "000003.pgm"));

  SUBCASE("identical predictions score 1") {
    const auto r = run("eval " + small + " --pred " + (dir / "data" / "eval").string() + " --gt " +
                       (dir / "data" / "eval").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("miou=1\n") != std::string::npos);
  }

  SUBCASE("train, resume, infer, evaluate") {
    const auto data = (dir / "data").string();
    const auto t = run("train " + small + " -d " + data + " -o " + (dir / "a.ckpt").string() +
                       " --log " + (dir / "a.log").string());
    CHECK(t.code == 0);
    const auto half = run("train " + small + " -d " + data + " -o " + (dir / "h.ckpt").string() +
                          " --until 2 --log " + (dir / "b.log").string());
    CHECK(half.code == 0);
    const auto rest = run("train " + small + " -d " + data + " -o " + (dir / "b.ckpt").string() +
                          " --resume " + (dir / "h.ckpt").string() + " --log " + (dir / "c.log").string());
    CHECK(rest.code == 0);
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
    CHECK(slurp(dir / "a.log") == slurp(dir / "b.log") + slurp(dir / "c.log"));

    const auto inf = run("infer --checkpoint " + (dir / "a.ckpt").string() + " --image " +
                         (dir / "data" / "eval" / "000000.ppm").string() + " -o " +
                         (dir / "p.pgm").string());
    CHECK(inf.code == 0);
    const auto map = segvit::read_pgm(dir / "p.pgm");
    CHECK(map.height == 16);
    CHECK(map.width == 16);

    const auto ev = run("eval --checkpoint " + (dir / "a.ckpt").string() + " -d " + data);
    CHECK(ev.code == 0);
    const double m = value_after(ev.out, "miou=");
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }

  fs::remove_all(dir);
}

TEST_CASE("cli errors") {
  const auto unknown = run("frobnicate");
  CHECK(unknown.code == 2);

  const auto bad_key = run("flops -c " + config("toy.cfg") + " -s encoder.colour=3");
  CHECK(bad_key.code == 1);
  CHECK(bad_key.out.find("error kind=config") != std::string::npos);

  const auto missing = run("flops -c /nonexistent.cfg");
  CHECK(missing.code == 1);
  CHECK(missing.out.find("error kind=io") != std::string::npos);

  CHECK(run("--help").code == 0);
}
