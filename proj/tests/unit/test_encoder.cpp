#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "svaesr/core/coord_grid.hpp"
#include "svaesr/model/encoder.hpp"
#include "svaesr/model/svae.hpp"

using namespace svaesr;
using namespace svaesr::model;

namespace {

nn::Matrix<double> random_tokens(int n, int dim, std::uint64_t seed) {
  nn::Matrix<double> m(n, dim);
  const auto v = testing::random_vector(m.size(), seed, 0.7);
  std::copy(v.begin(), v.end(), m.data.begin());
  return m;
}

nn::Matrix<double> permute_rows(const nn::Matrix<double>& m, std::uint64_t seed) {
  Rng rng(seed);
  const auto order = draw_distinct(m.rows, m.rows, rng);
  nn::Matrix<double> out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) std::copy(m.row(order[r]), m.row(order[r]) + m.cols, out.row(r));
  return out;
}

double weighted(const LatentDistribution<double>& d, const std::vector<double>& wm,
                const std::vector<double>& wl) {
  double s = 0;
  for (int i = 0; i < d.dim(); ++i) s += wm[i] * d.mean[i] + wl[i] * d.log_var[i];
  return s;
}

}  // namespace

TEST_CASE("encoder output is invariant to token order") {
  const SvaeModel m(testing::tiny_model());
  const auto pf = m.init_encoder(3);
  const auto p = nn::convert<double, float>(pf);
  const int dim = m.config().encoder.token_dim();
  const auto y = random_tokens(6, dim, 1), r = random_tokens(5, dim, 2);
  const auto a = encode_posterior<double>(m.encoder(), p, y, r);
  const auto b = encode_posterior<double>(m.encoder(), p, permute_rows(y, 9), permute_rows(r, 10));
  for (int i = 0; i < a.dim(); ++i) {
    CHECK(a.mean[i] == doctest::Approx(b.mean[i]).epsilon(1e-12));
    CHECK(a.log_var[i] == doctest::Approx(b.log_var[i]).epsilon(1e-12));
  }
  // The reference set does condition the output.
  const auto c = encode_posterior<double>(m.encoder(), p, y, random_tokens(5, dim, 3));
  double diff = 0;
  for (int i = 0; i < a.dim(); ++i) diff += std::abs(a.mean[i] - c.mean[i]);
  CHECK(diff > 1e-9);
}

TEST_CASE("a zero head yields the standard normal prior") {
  const SvaeModel m(testing::tiny_model());
  auto pf = m.init_encoder(3);
  for (const auto& seg : m.encoder_layout().segments())
    if (seg.name.rfind("encoder.head", 0) == 0)
      std::fill(pf.begin() + seg.offset, pf.begin() + seg.offset + seg.size(), 0.0f);
  const auto p = nn::convert<double, float>(pf);
  const int dim = m.config().encoder.token_dim();
  const auto d = encode_posterior<double>(m.encoder(), p, random_tokens(6, dim, 1), random_tokens(4, dim, 2));
  for (int i = 0; i < d.dim(); ++i) {
    CHECK(d.mean[i] == 0.0);
    CHECK(d.log_var[i] == 0.0);
  }
}

TEST_CASE("encoder backward matches central differences, tokens included") {
  const SvaeModel m(testing::tiny_model());
  auto p = nn::convert<double, float>(std::span<const float>(m.init_encoder(5)));
  const int dim = m.config().encoder.token_dim();
  auto y = random_tokens(6, dim, 11);
  const auto r = random_tokens(4, dim, 12);
  const auto wm = testing::random_vector(3, 13), wl = testing::random_vector(3, 14);
  ConditionalEncoder::Cache<double> cache;
  const auto d = m.encoder().forward<double>(p, y, r, &cache);
  std::vector<double> grads(p.size(), 0.0);
  nn::Matrix<double> dy;
  m.encoder().backward<double>(p, cache, wm, wl, grads.data(), &dy);
  (void)d;
  const auto f = [&](const std::vector<double>& q) {
    return weighted(encode_posterior<double>(m.encoder(), q, y, r), wm, wl);
  };
  const auto res = testing::grad_check(m.encoder_layout(), p, grads, f);
  CAPTURE(res.worst);
  CHECK(res.max_rel_error < 1e-4);
  REQUIRE(dy.rows == 6);
  REQUIRE(dy.cols == dim);
  for (int t = 0; t < 12; ++t) {
    const std::size_t i = (t * 37) % y.size();
    const double saved = y.data[i], h = 1e-6;
    y.data[i] = saved + h;
    const double fp = weighted(encode_posterior<double>(m.encoder(), p, y, r), wm, wl);
    y.data[i] = saved - h;
    const double fm = weighted(encode_posterior<double>(m.encoder(), p, y, r), wm, wl);
    y.data[i] = saved;
    const double fd = (fp - fm) / (2 * h);
    CHECK(std::abs(dy.data[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("reparameterization and prior draws have the right moments") {
  const LatentDistribution<double> dist({0.5, -1.0, 2.0}, {0.0, std::log(4.0), std::log(0.25)});
  Rng rng(77);
  const int n = 200000;
  std::vector<double> sum(3, 0), sq(3, 0), psum(3, 0), psq(3, 0);
  for (int t = 0; t < n; ++t) {
    const auto z = reparameterize(dist, rng);
    const auto e = sample_prior(3, rng);
    for (int i = 0; i < 3; ++i) {
      sum[i] += z[i];
      sq[i] += z[i] * z[i];
      psum[i] += e[i];
      psq[i] += e[i] * e[i];
    }
  }
  const double sd[3] = {1.0, 2.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    const double mean = sum[i] / n, var = sq[i] / n - mean * mean;
    // 5 sigma bands of the sample mean and sample variance.
    CHECK(std::abs(mean - dist.mean[i]) < 5 * sd[i] / std::sqrt(n));
    CHECK(std::abs(var - sd[i] * sd[i]) < 5 * sd[i] * sd[i] * std::sqrt(2.0 / n));
    const double pm = psum[i] / n, pv = psq[i] / n - pm * pm;
    CHECK(std::abs(pm) < 5 / std::sqrt(n));
    CHECK(std::abs(pv - 1) < 5 * std::sqrt(2.0 / n));
  }
}

TEST_CASE("reparameterization is pathwise differentiable") {
  const std::vector<double> eps{0.3, -1.2};
  const std::vector<double> mu{0.1, 0.4}, lv{-0.5, 0.8};
  const auto z = reparameterize(LatentDistribution<double>(mu, lv), eps);
  for (int i = 0; i < 2; ++i) {
    const double h = 1e-6;
    auto mp = mu, mm = mu, lp = lv, lm = lv;
    mp[i] += h;
    mm[i] -= h;
    lp[i] += h;
    lm[i] -= h;
    const double dmu = (reparameterize(LatentDistribution<double>(mp, lv), eps)[i] -
                        reparameterize(LatentDistribution<double>(mm, lv), eps)[i]) / (2 * h);
    const double dlv = (reparameterize(LatentDistribution<double>(mu, lp), eps)[i] -
                        reparameterize(LatentDistribution<double>(mu, lm), eps)[i]) / (2 * h);
    CHECK(dmu == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(dlv == doctest::Approx(0.5 * std::exp(lv[i] / 2) * eps[i]).epsilon(1e-6));
    CHECK(z[i] == doctest::Approx(mu[i] + std::exp(lv[i] / 2) * eps[i]));
  }
}

TEST_CASE("log-variance is clamped") {
  const LatentDistribution<double> d({0.0, 0.0}, {100.0, -100.0});
  CHECK(d.log_var[0] == kLogVarMax);
  CHECK(d.log_var[1] == kLogVarMin);
}

TEST_CASE("token sampling draws distinct pixels and encodes their position") {
  Rng rng(4);
  const auto idx = sample_indices(50, 20, rng);
  CHECK(std::set<int>(idx.begin(), idx.end()).size() == 20);
  for (int i : idx) CHECK((i >= 0 && i < 50));
  const auto all = sample_indices(9, 9, rng);
  CHECK(std::set<int>(all.begin(), all.end()).size() == 9);

  const auto img = testing::random_image(3, 5, 6, 8);
  const auto grid = make_coord_grid(5, 6);
  const posenc::PosEncConfig pe{2, 2, false};
  Rng a(9), b(9);
  const auto tok = to_pixel_sampler(img, grid, 7, a, pe);
  const auto picks = sample_indices(30, 7, b);
  REQUIRE(tok.rows == 7);
  REQUIRE(tok.cols == 3 + pe.code_length());
  for (int r = 0; r < 7; ++r) {
    const int pix = picks[r];
    for (int c = 0; c < 3; ++c)
      CHECK(tok(r, c) == doctest::Approx(2.0 * img.data()[c * 30 + pix] - 1.0));
    const auto code = posenc::encode(std::vector<double>{grid.coords[pix][0], grid.coords[pix][1]}, pe);
    for (int k = 0; k < pe.code_length(); ++k) CHECK(tok(r, 3 + k) == doctest::Approx(code[k]));
  }
}
