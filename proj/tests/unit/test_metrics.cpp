#include <doctest.h>

#include <fstream>
#include <sstream>

#include "srdrm/errors.hpp"
#include "srdrm/image.hpp"
#include "srdrm/metrics.hpp"
#include "test_support.hpp"

#ifndef SRDRM_TEST_DATA_DIR
#error "SRDRM_TEST_DATA_DIR must point at tests/data"
#endif

using namespace srdrm;
using namespace srdrm::testing;

namespace {

struct Reference {
  std::string name;
  double ssim, uicm, uism, uiconm, uiqm;
};

std::vector<Reference> load_references() {
  std::ifstream in(std::string(SRDRM_TEST_DATA_DIR) + "/natural/reference.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  std::vector<Reference> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    Reference r;
    std::string cell;
    std::getline(ss, r.name, ',');
    double* fields[] = {&r.ssim, &r.uicm, &r.uism, &r.uiconm, &r.uiqm};
    for (double* f : fields) {
      std::getline(ss, cell, ',');
      *f = std::stod(cell);
    }
    out.push_back(r);
  }
  return out;
}

ImageRGB8 natural(const std::string& name) {
  return read_image(std::string(SRDRM_TEST_DATA_DIR) + "/natural/" + name + ".png");
}

}  // namespace

TEST_CASE("psnr closed forms") {
  CHECK(psnr(ImageRGB8(8, 8, 0), ImageRGB8(8, 8, 255)) == doctest::Approx(0.0));
  CHECK(psnr(ImageRGB8(8, 8, 100), ImageRGB8(8, 8, 116)) == doctest::Approx(24.0484).epsilon(1e-3 / 24.0484));
  CHECK(psnr(ImageRGB8(8, 8, 7), ImageRGB8(8, 8, 7)) == kPsnrCap);
  CHECK_THROWS_AS(psnr(ImageRGB8(8, 8), ImageRGB8(8, 9)), ContractError);
}

TEST_CASE("ssim closed forms") {
  const ImageRGB8 img = smooth_image(40, 30, 3);
  CHECK(ssim(img, img) == 1.0);
  // Uniform 128 vs 64: (2 * 128 * 64 + C1) / (128^2 + 64^2 + C1).
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double expected = (2.0 * 128 * 64 + c1) / (128.0 * 128 + 64.0 * 64 + c1);
  CHECK(ssim(ImageRGB8(16, 16, 128), ImageRGB8(16, 16, 64)) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.8001).epsilon(1e-3));
  CHECK_THROWS_AS(ssim(ImageRGB8(10, 10), ImageRGB8(10, 10)), ContractError);
}

TEST_CASE("gaussian taps are normalized and symmetric") {
  const std::vector<double> t = gaussian_taps({});
  REQUIRE(t.size() == 11);
  double s = 0.0;
  for (double v : t) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t[0] == t[10]);
  CHECK(t[5] > t[4]);
}

TEST_CASE("ssim and uiqm match reference implementations on natural images") {
  const std::vector<Reference> refs = load_references();
  REQUIRE(refs.size() >= 10);
  for (const Reference& r : refs) {
    CAPTURE(r.name);
    const ImageRGB8 truth = natural(r.name);
    const ImageRGB8 gen = natural(r.name + "_degraded");
    CHECK(std::abs(ssim(gen, truth) - r.ssim) <= 1e-6);
    const UiqmResult u = uiqm(gen);
    CHECK(std::abs(u.uicm - r.uicm) <= 1e-4);
    CHECK(std::abs(u.uism - r.uism) <= 1e-4);
    CHECK(std::abs(u.uiconm - r.uiconm) <= 1e-4);
    CHECK(std::abs(u.uiqm - r.uiqm) <= 1e-4);
  }
}

TEST_CASE("uiqm of a flat gray image") {
  const UiqmResult u = uiqm(ImageRGB8(16, 16, 90));
  CHECK(u.uicm == 0.0);
  CHECK(u.uism == 0.0);
  CHECK(u.uiconm == 0.0);
  CHECK_THROWS_AS(uiqm(ImageRGB8(4, 4, 1)), ContractError);
  UiqmParams p;
  p.trim = 0.5;
  CHECK_THROWS_AS(uiqm(ImageRGB8(16, 16, 1), p), ContractError);
}

TEST_CASE("evaluate_dataset pairs by name and reports unmatched files") {
  TempDir dir("eval");
  const auto gen = dir.path() / "gen";
  const auto truth = dir.path() / "truth";
  std::filesystem::create_directories(gen);
  std::filesystem::create_directories(truth);
  for (int i = 0; i < 3; ++i) {
    const ImageRGB8 t = smooth_image(24, 16, 50 + i);
    write_image(t, truth / ("im" + std::to_string(i) + ".png"));
    write_image(t, gen / ("im" + std::to_string(i) + ".png"));
  }
  write_image(ImageRGB8(16, 16), gen / "extra.png");
  write_image(ImageRGB8(16, 16), truth / "lonely.png");

  const MetricReport r = evaluate_dataset(gen, truth, "4x");
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].id == "im0.png");
  CHECK(r.rows[2].psnr == kPsnrCap);
  CHECK(r.rows[1].ssim == 1.0);
  CHECK(r.unmatched.size() == 2);
  REQUIRE(r.mean.has_value());
  CHECK(r.mean->psnr == kPsnrCap);

  const std::string text = format_report(r);
  CHECK(text.find("unmatched") != std::string::npos);
  const std::string csv = format_report_csv(r);
  CHECK(csv.rfind("id,psnr,ssim,uiqm\n", 0) == 0);
  CHECK(csv.find("\nmean,") != std::string::npos);

  write_report(r, dir.path() / "report.txt");
  CHECK(std::filesystem::exists(dir.path() / "report.csv"));
}

TEST_CASE("empty evaluation has no aggregate") {
  TempDir dir("eval_empty");
  std::filesystem::create_directories(dir.path() / "a");
  std::filesystem::create_directories(dir.path() / "b");
  const MetricReport r = evaluate_dataset(dir.path() / "a", dir.path() / "b");
  CHECK_FALSE(r.mean.has_value());
  CHECK(format_report(r).find("no matched pairs") != std::string::npos);
}
