#include <doctest.h>

#include <fstream>
#include <iterator>
#include <set>

#include "srdrm/datakit.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/image.hpp"
#include "test_support.hpp"

using namespace srdrm;
using namespace srdrm::testing;
namespace fs = std::filesystem;

namespace {

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every file under root, keyed by relative path.
std::map<std::string, std::vector<char>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = file_bytes(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("bicubic resize keeps constants and extents") {
  const ImageRGB8 flat(37, 23, 141);
  for (auto [w, h] : {std::pair{18, 11}, {74, 46}, {37, 23}, {5, 40}}) {
    const ImageRGB8 r = resize_bicubic(flat, w, h);
    CHECK(r.width == std::size_t(w));
    CHECK(r.height == std::size_t(h));
    CHECK(r == ImageRGB8(w, h, 141));
  }
  const ImageRGB8 img = smooth_image(30, 20, 1);
  CHECK(resize_bicubic(img, 30, 20) == img);
  CHECK(halve(img).width == 15);
  CHECK(halve(ImageRGB8(7, 5)).height == 2);
}

TEST_CASE("bicubic halving of a linear ramp stays linear inside") {
  ImageRGB8 ramp(64, 8);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      for (std::size_t c = 0; c < 3; ++c) ramp.at(x, y, c) = static_cast<std::uint8_t>(2 * x + 40);
  const ImageRGB8 h = halve(ramp);
  // Output pixel x covers input centers 2x + 0.5: value 2 (2x + 0.5) + 40.
  for (std::size_t x = 3; x < 29; ++x) CHECK(int(h.at(x, 2, 0)) == int(4 * x + 41));
}

TEST_CASE("tensor conversion round trip") {
  const ImageRGB8 img = smooth_image(9, 7, 4);
  const Tensor4<float> t = image_to_tensor<float>(img);
  CHECK(t.shape() == Shape4{1, 3, 7, 9});
  CHECK(t(0, 1, 2, 3) == doctest::Approx(2.0 * img.at(3, 2, 1) / 255.0 - 1.0));
  CHECK(tensor_to_image(t) == img);
  const Tensor4<float> out_of_range({1, 3, 1, 1}, {-3.0f, 3.0f, 0.0f});
  const ImageRGB8 clamped = tensor_to_image(out_of_range);
  CHECK(clamped.pixels == std::vector<std::uint8_t>{0, 255, 128});
}

TEST_CASE("prepare builds the three LR sets with exact extents") {
  TempDir dir("prep");
  const fs::path in = dir.path() / "in";
  fs::create_directories(in / "test");
  for (int i = 0; i < 5; ++i) write_image(smooth_image(640, 480, i), in / ("a" + std::to_string(i) + ".png"));
  write_image(smooth_image(800, 600, 9), in / "big.jpg");
  write_image(smooth_image(640, 480, 10), in / "test" / "t0.png");
  std::ofstream(in / "broken.png") << "not an image";

  PrepareOptions opt;
  opt.seed = 3;
  const DatasetManifest m = prepare_lr_sets(in, dir.path() / "out", opt);
  CHECK(m.pairs(Split::train).size() + m.pairs(Split::val).size() == 6);
  CHECK(m.pairs(Split::val).size() == 0);  // floor(6 * 0.1)
  CHECK(m.pairs(Split::test).size() == 1);
  CHECK(m.rejects == std::vector<std::string>{"broken.png"});

  for (Split s : {Split::train, Split::test}) {
    for (const ManifestPair& p : m.pairs(s)) {
      const ImageRGB8 hr = read_image(m.root / p.hr);
      CHECK(hr.width == 640);
      CHECK(hr.height == 480);
      const std::map<int, std::pair<std::size_t, std::size_t>> want = {
          {2, {320, 240}}, {4, {160, 120}}, {8, {80, 60}}};
      for (const auto& [scale, rel] : p.lr) {
        const ImageRGB8 lr = read_image(m.root / rel);
        CHECK(lr.width == want.at(scale).first);
        CHECK(lr.height == want.at(scale).second);
      }
    }
  }
  validate_manifest(read_manifest(dir.path() / "out"));

  const auto first = snapshot(dir.path() / "out");
  fs::remove_all(dir.path() / "out");
  prepare_lr_sets(in, dir.path() / "out", opt);
  CHECK(snapshot(dir.path() / "out") == first);
}

TEST_CASE("prepare rejects bad options and empty inputs") {
  TempDir dir("prep_bad");
  fs::create_directories(dir.path() / "in");
  CHECK_THROWS_AS(prepare_lr_sets(dir.path() / "in", dir.path() / "out"), ContractError);
  write_image(smooth_image(64, 48, 1), dir.path() / "in" / "x.png");
  PrepareOptions opt;
  opt.scales = {3};
  CHECK_THROWS_AS(prepare_lr_sets(dir.path() / "in", dir.path() / "out", opt), ContractError);
  opt = {};
  opt.jpeg_quality = 0;
  CHECK_THROWS_AS(prepare_lr_sets(dir.path() / "in", dir.path() / "out", opt), ContractError);
}

TEST_CASE("val split takes floor(n / 10) of the pool") {
  TempDir dir("prep_val");
  fs::create_directories(dir.path() / "in");
  for (int i = 0; i < 12; ++i) write_image(smooth_image(64, 48, i), dir.path() / "in" / ("p" + std::to_string(i) + ".png"));
  PrepareOptions opt;
  opt.scales = {2};
  const DatasetManifest a = prepare_lr_sets(dir.path() / "in", dir.path() / "o1", opt);
  CHECK(a.pairs(Split::val).size() == 1);
  CHECK(a.pairs(Split::train).size() == 11);
  opt.seed = 99;
  const DatasetManifest b = prepare_lr_sets(dir.path() / "in", dir.path() / "o2", opt);
  CHECK(b.pairs(Split::val).size() == 1);
}

TEST_CASE("manifest text round trip and validation") {
  TempDir dir("manifest");
  const DatasetManifest m = synthetic_dataset(dir.path(), 3, 8, 6, 4, 1);
  const DatasetManifest back = parse_manifest(format_manifest(m), dir.path());
  CHECK(back.scales == m.scales);
  CHECK(back.splits == m.splits);
  CHECK(back.seed == m.seed);
  validate_manifest(back);

  CHECK_THROWS_AS(parse_manifest("format = srdrm-manifest 2\n", dir.path()), FormatError);
  CHECK_THROWS_AS(parse_manifest("format = srdrm-manifest 1\nscales = 2\npair = train|a|b\n", dir.path()),
                  FormatError);

  fs::remove(dir.path() / m.pairs(Split::train)[1].hr);
  CHECK_THROWS_AS(validate_manifest(back), FormatError);
  CHECK_THROWS_AS(read_manifest(dir.path() / "missing"), Error);
}

TEST_CASE("batch stream is seeded, covers every pair and keeps the last short batch") {
  TempDir dir("batches");
  const DatasetManifest m = synthetic_dataset(dir.path(), 5, 8, 6, 2, 2);
  BatchStream a(m, Split::train, 2, 2, 17);
  BatchStream b(m, Split::train, 2, 2, 17);
  CHECK(a.batches_per_epoch() == 3);
  for (std::size_t epoch = 1; epoch <= 2; ++epoch) {
    a.start_epoch(epoch);
    b.start_epoch(epoch);
    std::multiset<std::string> seen;
    std::vector<std::size_t> sizes;
    while (auto batch = a.next()) {
      const auto other = b.next();
      REQUIRE(other.has_value());
      CHECK(batch->ids == other->ids);
      CHECK(batch->lr.shape() == Shape4{batch->ids.size(), 3, 6, 8});
      CHECK(batch->hr.shape() == Shape4{batch->ids.size(), 3, 12, 16});
      seen.insert(batch->ids.begin(), batch->ids.end());
      sizes.push_back(batch->ids.size());
    }
    CHECK(seen.size() == 5);
    CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == 5);
    CHECK(sizes == std::vector<std::size_t>{2, 2, 1});
  }
  CHECK_THROWS_AS(BatchStream(m, Split::train, 4, 2, 1), ContractError);
}
