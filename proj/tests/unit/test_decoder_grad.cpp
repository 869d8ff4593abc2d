#include <doctest.h>

#include "grad_harness.hpp"

using namespace svaesr;
using namespace svaesr::model;

namespace {

void run_check(ModelConfig cfg, bool with_z) {
  SvaeModel m(cfg);
  auto p = testing::perturbed(m.init_generator(7), 99);
  const ImageTensor lr = testing::random_image(3, 5, 6, 3);
  const CoordGrid grid = make_coord_grid(9, 11);
  const auto w = testing::random_vector(grid.size() * 3, 5);
  const auto z = testing::random_vector(cfg.decoder.latent_dim, 6);
  const std::vector<double>* zp = with_z ? &z : nullptr;

  const auto analytic = testing::decoder_gradient(m, p, lr, grid, w, zp);
  const auto res = testing::grad_check(
      m.generator_layout(), p, analytic,
      [&](const std::vector<double>& q) { return testing::decoder_objective(m, q, lr, grid, w, zp); });
  INFO(res.worst);
  CHECK(res.checked > 0);
  CHECK(res.max_rel_error <= 1e-3);
}

}  // namespace

TEST_CASE("query_rgb gradient matches finite differences") {
  run_check(testing::tiny_model(), true);
}

TEST_CASE("query_rgb gradient without latent signal") {
  run_check(testing::tiny_model(), false);
}

TEST_CASE("query_rgb gradient with ablated decoder features") {
  auto cfg = testing::tiny_model();
  cfg.decoder.unfold = false;
  cfg.decoder.local_ensemble = false;
  cfg.decoder.cell_decode = false;
  cfg.decoder.base_skip = false;
  run_check(cfg, true);
}
