#include <doctest.h>

#include "grad_harness.hpp"

using namespace svaesr;
using namespace svaesr::train;

namespace {

testing::LossFixture make_fixture(int fakes, bool add_total) {
  TrainConfig cfg = preset_config(Preset::kToy);
  cfg.model = testing::tiny_model();
  cfg.sampler = {6, 20, 5, 1.0, 2.0, false};
  cfg.fakes_per_real = fakes;
  cfg.add_total_loss = add_total;
  const std::vector<ImageTensor> refs{testing::random_image(3, 9, 8, 12)};
  return testing::LossFixture(cfg, testing::random_image(3, 14, 14, 11), refs, 5);
}

}  // namespace

TEST_CASE("encoder_loss gradient w.r.t. encoder parameters matches finite differences") {
  for (int fakes : {1, 2}) {
    CAPTURE(fakes);
    auto f = make_fixture(fakes, false);
    const double live = f.encoder_loss_at(f.enc);
    f.freeze_fake_latents();
    CHECK(f.encoder_loss_at(f.enc) == doctest::Approx(live).epsilon(1e-12));
    const auto grads = f.encoder_grad();
    const auto res = testing::grad_check(f.model->encoder_layout(), f.enc, grads,
                                         [&](const std::vector<double>& e) { return f.encoder_loss_at(e); });
    INFO(res.worst);
    CHECK(res.max_rel_error <= 1e-3);
  }
}

TEST_CASE("decoder_loss gradient w.r.t. generator parameters matches finite differences") {
  for (bool add_total : {false, true}) {
    for (int fakes : {1, 2}) {
      CAPTURE(add_total);
      CAPTURE(fakes);
      auto f = make_fixture(fakes, add_total);
      const auto grads = f.decoder_grad();
      const auto res = testing::grad_check(f.model->generator_layout(), f.gen, grads,
                                           [&](const std::vector<double>& g) { return f.decoder_loss_at(g); });
      INFO(res.worst);
      CHECK(res.max_rel_error <= 1e-3);
    }
  }
}
