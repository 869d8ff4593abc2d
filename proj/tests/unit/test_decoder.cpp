#include <doctest.h>

#include <cmath>
#include <optional>

#include "support.hpp"
#include "svaesr/core/coord_grid.hpp"
#include "svaesr/core/error.hpp"
#include "svaesr/model/liif_decoder.hpp"

using namespace svaesr;
using namespace svaesr::model;

namespace {

// Zeroes the render MLP's output layer so only the interpolation skip remains.
void silence_mlp(const SvaeModel& m, std::vector<float>& p) {
  for (const auto& seg : m.generator_layout().segments())
    if (seg.name.rfind("decoder.out", 0) == 0)
      std::fill(p.begin() + seg.offset, p.begin() + seg.offset + seg.size(), 0.0f);
}

// Half-pixel bilinear sampling with edge replication, sampled at output pixel centers.
double bilinear_oracle(const ImageTensor& img, int c, int oh, int ow, int i, int j) {
  const auto src = [](int o, int out_len, int in_len) {
    return std::clamp((o + 0.5) * in_len / out_len - 0.5, 0.0, in_len - 1.0);
  };
  const double y = src(i, oh, img.height()), x = src(j, ow, img.width());
  const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, img.height() - 1), x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
         fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
}

}  // namespace

TEST_CASE("ensemble neighbours: weights are positive, sum to one, favour the nearest code") {
  const SvaeModel m(testing::tiny_model());
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::array<double, 2> q{2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};
    const auto nb = m.decoder().neighbours(5, 7, q);
    REQUIRE(nb.size() == 4);
    double total = 0;
    for (const auto& n : nb) {
      CHECK(n.weight > 0);
      CHECK(std::abs(n.rel[0]) <= 2.0 + 1e-9);
      CHECK(std::abs(n.rel[1]) <= 2.0 + 1e-9);
      total += n.weight;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Midpoint between four code centers: equal weights, unit offsets.
  const auto mid = m.decoder().neighbours(4, 4, {0.0, 0.0});
  for (const auto& n : mid) {
    CHECK(n.weight == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(std::abs(n.rel[0]) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(std::abs(n.rel[1]) == doctest::Approx(1.0).epsilon(1e-5));
  }
  // On a code center the weight concentrates on that code.
  const auto on = m.decoder().neighbours(4, 4, {pixel_center(1, 4), pixel_center(2, 4)});
  double best = 0;
  for (const auto& n : on)
    if (n.row == 1 && n.col == 2) best += n.weight;
  CHECK(best > 0.99);
}

TEST_CASE("super_resolve: output size follows round(H * s)") {
  const SvaeModel m(testing::tiny_model());
  const auto p = m.init_generator(1);
  const auto lr = testing::random_image(3, 20, 20, 3);
  const auto sr = super_resolve(m.extractor(), m.decoder(), p, lr, 6.3, std::nullopt);
  CHECK(sr.height() == 126);
  CHECK(sr.width() == 126);
  CHECK(sr.channels() == 3);
  CHECK(sr.in_range());
  const auto odd = super_resolve(m.extractor(), m.decoder(), p, testing::random_image(3, 7, 9, 4), 2.5,
                                 std::nullopt);
  CHECK(odd.height() == 18);
  CHECK(odd.width() == 23);
}

TEST_CASE("super_resolve: result does not depend on the query chunk size") {
  const SvaeModel m(testing::tiny_model());
  const auto p = m.init_generator(7);
  const auto lr = testing::random_image(3, 9, 11, 5);
  const std::vector<float> z{0.3f, -1.0f, 0.5f};
  const auto a = super_resolve(m.extractor(), m.decoder(), p, lr, 3.3, z, 4096);
  const auto b = super_resolve(m.extractor(), m.decoder(), p, lr, 3.3, z, 7);
  const auto c = super_resolve(m.extractor(), m.decoder(), p, lr, 3.3, z, 1);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  CHECK(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
  const auto other = super_resolve(m.extractor(), m.decoder(), p, lr, 3.3, std::vector<float>{2, 2, 2});
  CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), other.data().begin()));
}

TEST_CASE("interpolation skip: a silent MLP renders half-pixel bilinear upsampling") {
  const SvaeModel m(testing::tiny_model());
  auto p = m.init_generator(3);
  silence_mlp(m, p);
  const auto lr = testing::random_image(3, 6, 8, 6);
  const auto same = super_resolve(m.extractor(), m.decoder(), p, lr, 1.0, std::nullopt);
  for (std::size_t i = 0; i < lr.size(); ++i) CHECK(same.data()[i] == doctest::Approx(lr.data()[i]).epsilon(1e-5));
  const int oh = 15, ow = 19;
  const auto up = super_resolve_to(m.extractor(), m.decoder(), p, lr, oh, ow, std::nullopt);
  double worst = 0;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j)
        worst = std::max(worst, std::abs(up.at(c, i, j) - bilinear_oracle(lr, c, oh, ow, i, j)));
  CHECK(worst < 1e-5);
}

TEST_CASE("decoder ablations still render") {
  for (int which = 0; which < 4; ++which) {
    auto cfg = testing::tiny_model();
    if (which == 0) cfg.decoder.unfold = false;
    if (which == 1) cfg.decoder.local_ensemble = false;
    if (which == 2) cfg.decoder.cell_decode = false;
    if (which == 3) cfg.decoder.posenc = {0, 2, true};
    const SvaeModel m(cfg);
    const auto p = m.init_generator(1);
    const auto sr = super_resolve(m.extractor(), m.decoder(), p, testing::random_image(3, 5, 5, 1), 2.0,
                                  std::vector<float>(3, 0.0f));
    CHECK(sr.height() == 10);
    CHECK(sr.in_range());
  }
}

TEST_CASE("super_resolve rejects bad arguments") {
  const SvaeModel m(testing::tiny_model());
  const auto p = m.init_generator(1);
  const auto lr = testing::random_image(3, 5, 5, 1);
  CHECK_THROWS_AS(super_resolve(m.extractor(), m.decoder(), p, lr, 2.0, std::vector<float>(5, 0.0f)),
                  ArgumentError);
  CHECK_THROWS_AS(super_resolve(m.extractor(), m.decoder(), p, lr, 2.0, std::nullopt, 0), ArgumentError);
}
