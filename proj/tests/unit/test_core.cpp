#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "support.hpp"
#include "svaesr/core/coord_grid.hpp"
#include "svaesr/core/error.hpp"
#include "svaesr/core/metrics.hpp"
#include "svaesr/core/png_io.hpp"
#include "svaesr/core/resize.hpp"
#include "svaesr/kernels/dense.hpp"
#include "svaesr/kernels/resample.hpp"

using namespace svaesr;
namespace fs = std::filesystem;

namespace {

// Direct 2D evaluation of the antialiased half-pixel bicubic, written without
// the separable tap tables: out(i, j) = sum_p sum_q wy(i, p) wx(j, q) in(p, q).
double keys(double x) {
  x = std::abs(x);
  if (x <= 1) return ((1.5 * x - 2.5) * x) * x + 1;
  if (x < 2) return ((-0.5 * x + 2.5) * x - 4) * x + 2;
  return 0;
}

int mirror(int j, int n) {
  while (j < 0 || j >= n) j = j < 0 ? -j - 1 : 2 * n - 1 - j;
  return j;
}

std::vector<double> axis_weights(int in, int out, int i, bool antialias) {
  const double s = static_cast<double>(out) / in;
  const double k = (antialias && s < 1) ? s : 1.0;
  const double u = (i + 0.5) / s - 0.5;
  std::vector<double> w(in, 0.0);
  double total = 0;
  for (int p = static_cast<int>(std::floor(u)) - 40; p <= static_cast<int>(std::ceil(u)) + 40; ++p) {
    const double v = keys((u - p) * k);
    w[mirror(p, in)] += v;
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

ImageTensor oracle_resize(const ImageTensor& img, int oh, int ow, bool antialias) {
  ImageTensor out(img.channels(), oh, ow, img.range());
  for (int c = 0; c < img.channels(); ++c)
    for (int i = 0; i < oh; ++i) {
      const auto wy = axis_weights(img.height(), oh, i, antialias);
      for (int j = 0; j < ow; ++j) {
        const auto wx = axis_weights(img.width(), ow, j, antialias);
        double acc = 0;
        for (int p = 0; p < img.height(); ++p)
          for (int q = 0; q < img.width(); ++q) acc += wy[p] * wx[q] * img.at(c, p, q);
        out.at(c, i, j) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  return out;
}

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  return m;
}

struct ThreadGuard {
  int saved = omp_get_max_threads();
  explicit ThreadGuard(int n) { omp_set_num_threads(n); }
  ~ThreadGuard() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("coord grid: row-major pixel centers with uniform cells") {
  const auto g = make_coord_grid(3, 5);
  REQUIRE(g.size() == 15);
  CHECK(g.coords[0][0] == doctest::Approx(-2.0 / 3));
  CHECK(g.coords[0][1] == doctest::Approx(-0.8));
  CHECK(g.coords[7][0] == doctest::Approx(0.0));
  CHECK(g.coords[7][1] == doctest::Approx(0.0));
  CHECK(g.coords[14][0] == doctest::Approx(2.0 / 3));
  CHECK(g.coords[14][1] == doctest::Approx(0.8));
  for (const auto& c : g.cells) {
    CHECK(c[0] == doctest::Approx(2.0 / 3));
    CHECK(c[1] == doctest::Approx(0.4));
  }
  CHECK(pixel_center(0, 2) == doctest::Approx(-0.5));
}

TEST_CASE("bicubic matches a direct 2D oracle") {
  const auto img = testing::random_image(3, 11, 9, 5);
  for (auto [oh, ow] : {std::pair{22, 18}, {33, 27}, {5, 4}, {3, 3}, {13, 7}, {11, 9}}) {
    for (bool aa : {true, false}) {
      CAPTURE(oh);
      CAPTURE(ow);
      CAPTURE(aa);
      CHECK(max_abs_diff(bicubic_resize_to(img, oh, ow, aa), oracle_resize(img, oh, ow, aa)) < 2e-6);
    }
  }
}

TEST_CASE("bicubic reproduces linear ramps away from borders") {
  ImageTensor ramp(1, 4, 32);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 32; ++x) ramp.at(0, y, x) = 0.1f + 0.02f * x;
  const auto up = bicubic_resize_to(ramp, 4, 64);
  for (int j = 6; j < 58; ++j) {
    const double u = (j + 0.5) / 2 - 0.5;
    CHECK(up.at(0, 1, j) == doctest::Approx(0.1 + 0.02 * u).epsilon(1e-5));
  }
  const auto down = bicubic_resize_to(ramp, 4, 16);
  for (int j = 3; j < 13; ++j) {
    const double u = (j + 0.5) * 2 - 0.5;
    CHECK(down.at(0, 1, j) == doctest::Approx(0.1 + 0.02 * u).epsilon(1e-5));
  }
}

TEST_CASE("bicubic: identity size returns the input, scale rounds dimensions") {
  const auto img = testing::random_image(3, 10, 7, 9);
  CHECK(max_abs_diff(bicubic_resize_to(img, 10, 7), img) < 1e-6);
  const auto r = bicubic_resize(img, 2.5);
  CHECK(r.height() == 25);
  CHECK(r.width() == 18);
  CHECK_THROWS_AS(bicubic_resize(img, 0.0), ArgumentError);
}

TEST_CASE("psnr against hand-computed values") {
  ImageTensor a(1, 2, 2), b(1, 2, 2);
  b.at(0, 0, 0) = 0.1f;
  // MSE = 0.01 / 4
  CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(1 / 0.0025)).epsilon(1e-6));
  CHECK(psnr(a, a) == kPsnrCap);
  // Signed images use peak 2.
  ImageTensor s(1, 2, 2, ValueRange::kSigned), t(1, 2, 2, ValueRange::kSigned);
  t.at(0, 1, 1) = 0.2f;
  CHECK(psnr(s, t) == doctest::Approx(10 * std::log10(4 / 0.01)).epsilon(1e-5));
  // Border crop drops the differing pixel.
  ImageTensor c(1, 3, 3), d(1, 3, 3);
  d.at(0, 0, 0) = 0.5f;
  d.at(0, 1, 1) = 0.1f;
  CHECK(psnr(c, d, 1) == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("luma conversion and 8-bit quantization") {
  ImageTensor rgb(3, 1, 1);
  rgb.at(0, 0, 0) = 1.0f;
  rgb.at(1, 0, 0) = 0.5f;
  rgb.at(2, 0, 0) = 0.25f;
  const auto y = rgb_to_y(rgb);
  REQUIRE(y.channels() == 1);
  CHECK(y.at(0, 0, 0) == doctest::Approx(0.299 + 0.587 * 0.5 + 0.114 * 0.25).epsilon(1e-6));
  ImageTensor q(1, 1, 3);
  q.at(0, 0, 0) = 0.5f;
  q.at(0, 0, 1) = 2.4f / 255;
  q.at(0, 0, 2) = 0.999f;
  const auto qq = quantize_8bit(q);
  CHECK(qq.at(0, 0, 0) == doctest::Approx(128.0 / 255));
  CHECK(qq.at(0, 0, 1) == doctest::Approx(2.0 / 255));
  CHECK(qq.at(0, 0, 2) == doctest::Approx(1.0));
}

TEST_CASE("png round trip is pixel-identical for 8-bit content") {
  const auto img = quantize_8bit(testing::random_image(3, 13, 17, 21));
  const auto path = (fs::temp_directory_path() / "svaesr_png_roundtrip.png").string();
  save_image(img, path);
  CHECK(has_png_signature(path));
  const auto back = load_image(path);
  REQUIRE(back.same_shape(img));
  CHECK(max_abs_diff(back, img) == 0.0);
  fs::remove(path);
  CHECK_FALSE(has_png_signature(path));
  CHECK_THROWS_AS(load_image(path), IoError);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  ThreadGuard threads(4);
  const int n = 300, k = 37, o = 19;
  const auto x = testing::random_vector(static_cast<std::size_t>(n) * k, 1);
  const auto m = testing::random_vector(static_cast<std::size_t>(k) * o, 2);
  const auto bias = testing::random_vector(o, 3);
  std::vector<double> y1(static_cast<std::size_t>(n) * o), y2(y1.size());
  kernels::matmul_nn(x.data(), m.data(), bias.data(), y1.data(), n, k, o);
  kernels::serial::matmul_nn(x.data(), m.data(), bias.data(), y2.data(), n, k, o);
  CHECK(y1 == y2);

  std::vector<double> c1(static_cast<std::size_t>(k) * o, 0.5), c2 = c1;
  kernels::matmul_tn_acc(x.data(), y1.data(), c1.data(), n, k, o);
  kernels::serial::matmul_tn_acc(x.data(), y1.data(), c2.data(), n, k, o);
  CHECK(c1 == c2);

  const int h = 9, w = 14, ch = 5;
  const auto in = testing::random_vector(static_cast<std::size_t>(h) * w * ch, 4);
  std::vector<float> inf(in.begin(), in.end());
  std::vector<float> col1(static_cast<std::size_t>(h) * w * 9 * ch), col2(col1.size());
  kernels::im2col3x3(inf.data(), col1.data(), h, w, ch);
  kernels::serial::im2col3x3(inf.data(), col2.data(), h, w, ch);
  CHECK(col1 == col2);
  std::vector<float> back1(inf.size(), 0.f), back2(inf.size(), 0.f);
  kernels::col2im3x3(col1.data(), back1.data(), h, w, ch);
  kernels::serial::col2im3x3(col1.data(), back2.data(), h, w, ch);
  CHECK(back1 == back2);

  const auto img = testing::random_image(3, 40, 31, 8);
  for (auto [oh, ow] : {std::pair{83, 64}, {17, 12}}) {
    const auto p = bicubic_resize_to(img, oh, ow);
    const auto s = serial::bicubic_resize_to(img, oh, ow);
    CHECK(std::equal(p.data().begin(), p.data().end(), s.data().begin()));
  }
  const auto a = testing::random_image(1, 40, 31, 10);
  CHECK(kernels::squared_error_sum(a.data().data(), img.data().data(), 31, 2, 3, 30, 20) ==
        kernels::serial::squared_error_sum(a.data().data(), img.data().data(), 31, 2, 3, 30, 20));
}

TEST_CASE("col2im is the adjoint of im2col") {
  const int h = 6, w = 5, c = 2;
  const auto x = testing::random_vector(static_cast<std::size_t>(h) * w * c, 11);
  const auto g = testing::random_vector(static_cast<std::size_t>(h) * w * 9 * c, 12);
  std::vector<double> col(g.size()), back(x.size(), 0.0);
  kernels::im2col3x3(x.data(), col.data(), h, w, c);
  kernels::col2im3x3(g.data(), back.data(), h, w, c);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < g.size(); ++i) lhs += g[i] * col[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += back[i] * x[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
