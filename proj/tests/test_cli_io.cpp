#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "revsnn/bench.hpp"
#include "revsnn/config.hpp"
#include "revsnn/data.hpp"

using namespace revsnn;

TEST_CASE("minimal config fills documented defaults") {
  RunConfig c = parse_config_text("[model]\nfamily = revsresnet\n");
  CHECK(c.T == 4);
  CHECK(c.batch == 8);
  CHECK(c.precision == "f64");
  CHECK(c.engine == "reversible");
  CHECK(c.source == "synthetic");
}

TEST_CASE("negative T is rejected citing the key") {
  try {
    parse_config_text("[model]\nfamily = revsresnet\n[run]\nT = -1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "T");
  }
}

TEST_CASE("unknown keys are rejected with their line") {
  try {
    parse_config_text("[model]\nfamily = revsresnet\nbogus = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "bogus");
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_config_text("[model]\nfamily = revsresnet\n[weird]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("family = revsresnet\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run]\nT = 4\n"), ConfigError);  // missing [model]
}

TEST_CASE("config round-trips through its serializer") {
  RunConfig c = parse_config_text(
      "[model]\nfamily = revsformer\nde = 64\nheads = 8\nl = 3\nneuron = if\n"
      "[run]\nengine = oracle\nT = 2\nseed = 99\nprecision = f32\n"
      "[optimizer]\nkind = adamw\nlr = 0.001\n"
      "[dataset]\ntask = xor_patterns\nnum_samples = 32\nshape = 1,8,8\n");
  RunConfig c2 = parse_config_text(serialize_config(c));
  CHECK(config_equal(c, c2));
  CHECK(c2.embed_dim == 64);
  CHECK(c2.opt_kind == "adamw");
  CHECK(c2.seed == 99);
}

namespace {

void be32(std::ofstream& f, u64 v) {
  unsigned char b[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>(v & 0xff)};
  f.write(reinterpret_cast<char*>(b), 4);
}

struct IdxFixture {
  std::string images = "idx_fixture_images.bin";
  std::string labels = "idx_fixture_labels.bin";
  IdxFixture(u64 img_magic = 0x803, u64 count = 2, bool truncate = false, u64 label_count = 2) {
    {
      std::ofstream f(images, std::ios::binary);
      be32(f, img_magic);
      be32(f, count);
      be32(f, 2);
      be32(f, 2);
      // two 2x2 images, known bytes
      const unsigned char px[8] = {0, 51, 102, 153, 204, 255, 0, 255};
      f.write(reinterpret_cast<const char*>(px), truncate ? 5 : 8);
    }
    {
      std::ofstream f(labels, std::ios::binary);
      be32(f, 0x801);
      be32(f, label_count);
      const unsigned char lb[2] = {1, 0};
      f.write(reinterpret_cast<const char*>(lb), static_cast<std::streamsize>(label_count));
    }
  }
  ~IdxFixture() {
    std::remove(images.c_str());
    std::remove(labels.c_str());
  }
};

}  // namespace

TEST_CASE("idx loader reads the handcrafted fixture byte for byte") {
  IdxFixture fx;
  Dataset<double> d = load_idx<double>(fx.images, fx.labels);
  REQUIRE(d.samples.size() == 2);
  CHECK(d.labels[0] == 1);
  CHECK(d.labels[1] == 0);
  CHECK(d.samples[0].shape() == std::vector<i64>{1, 2, 2});
  CHECK(d.samples[0][0] == 0.0);
  CHECK(d.samples[0][1] == Catch::Approx(51.0 / 255.0));
  CHECK(d.samples[0][3] == Catch::Approx(153.0 / 255.0));
  CHECK(d.samples[1][1] == 1.0);
}

TEST_CASE("idx loader error paths") {
  {
    IdxFixture fx(0x1234);
    CHECK_THROWS_AS(load_idx<double>(fx.images, fx.labels), IoError);
  }
  {
    IdxFixture fx(0x803, 2, false, 3);  // count mismatch
    CHECK_THROWS_AS(load_idx<double>(fx.images, fx.labels), IoError);
  }
  {
    IdxFixture fx(0x803, 2, true);  // truncated payload
    CHECK_THROWS_AS(load_idx<double>(fx.images, fx.labels), IoError);
  }
  {
    std::ofstream f("idx_empty.bin", std::ios::binary);
    f.close();
    CHECK_THROWS_AS(load_idx<double>("idx_empty.bin", "idx_empty.bin"), IoError);
    std::remove("idx_empty.bin");
  }
}

TEST_CASE("synthetic datasets are deterministic per seed") {
  auto a = make_synthetic<double>(SynthTask::two_gaussians, 8, 2, {1, 4, 4}, 7);
  auto b = make_synthetic<double>(SynthTask::two_gaussians, 8, 2, {1, 4, 4}, 7);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    for (i64 j = 0; j < a.samples[i].numel(); ++j) CHECK(a.samples[i][j] == b.samples[i][j]);
  CHECK(a.labels == b.labels);

  auto x = make_synthetic<double>(SynthTask::xor_patterns, 8, 2, {1, 4, 4}, 7);
  CHECK(x.samples.size() == 8);
}

TEST_CASE("line fit recovers a known slope") {
  bench::LineFit f = bench::fit_line({1, 2, 4, 8}, {3, 5, 9, 17});  // y = 2x + 1
  CHECK(f.slope == Catch::Approx(2.0));
  CHECK(f.intercept == Catch::Approx(1.0));
  CHECK(f.r2 == Catch::Approx(1.0));
}

TEST_CASE("bench CSV uses the frozen header and parses back") {
  std::vector<bench::SweepRow> rows(1);
  rows[0].family = "resnet";
  rows[0].mode = "oracle";
  rows[0].depth = 2;
  rows[0].T = 4;
  rows[0].dim = 8;
  rows[0].batch = 2;
  rows[0].peak_activation_bytes_per_img = 1234.5;
  rows[0].mult_adds = 999;
  rows[0].wall_ms = 1.5;
  const std::string path = "bench_test.csv";
  bench::write_csv(path, rows);
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "family,mode,depth,T,dim,batch,peak_activation_bytes_per_img,mult_adds,wall_ms");
  std::getline(in, line);
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  REQUIRE(cells.size() == 9);
  CHECK(cells[0] == "resnet");
  CHECK(std::stod(cells[6]) == Catch::Approx(1234.5));
  std::remove(path.c_str());
}
