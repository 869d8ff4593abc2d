#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "support.hpp"
#include "svaesr/core/error.hpp"
#include "svaesr/core/png_io.hpp"
#include "svaesr/data/dataset.hpp"

using namespace svaesr;
using namespace svaesr::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool same_pixels(const ImageTensor& a, const ImageTensor& b) {
  return a.same_shape(b) && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_CASE("manifest: relative paths, references, comments, validation") {
  TempDir dir("svaesr_manifest_test");
  fs::create_directories(dir.path / "img");
  save_image(testing::random_image(3, 4, 4, 1), (dir.path / "img/b.png").string());
  save_image(testing::random_image(3, 4, 4, 2), (dir.path / "img/a.png").string());
  save_image(testing::random_image(1, 4, 4, 3), (dir.path / "ref.png").string());
  {
    std::ofstream f(dir.path / "set.txt");
    f << "# fixture\nname=tiny\nrole=train\nref=ref.png\n\nimg/b.png\nimg/a.png\n";
  }
  const auto m = read_manifest((dir.path / "set.txt").string());
  CHECK(m.name == "tiny");
  CHECK(m.role == Role::kTrain);
  REQUIRE(m.image_paths.size() == 2);
  CHECK(fs::equivalent(m.image_paths[0], dir.path / "img/b.png"));
  REQUIRE(m.reference_paths.size() == 1);

  write_manifest(m, (dir.path / "copy.txt").string());
  const auto back = read_manifest((dir.path / "copy.txt").string());
  CHECK(back.name == m.name);
  CHECK(back.role == m.role);
  CHECK(back.image_paths == m.image_paths);
  CHECK(back.reference_paths == m.reference_paths);

  const auto listed = manifest_from_directory((dir.path / "img").string(), "listed", Role::kEval);
  REQUIRE(listed.image_paths.size() == 2);
  CHECK(fs::path(listed.image_paths[0]).filename() == "a.png");

  const auto imgs = load_images(m.reference_paths);
  REQUIRE(imgs.size() == 1);
  CHECK(imgs[0].channels() == 3);

  {
    std::ofstream f(dir.path / "missing.txt");
    f << "name=x\nimg/nope.png\n";
  }
  CHECK_THROWS(read_manifest((dir.path / "missing.txt").string()));
  {
    std::ofstream(dir.path / "fake.png") << "not a png";
    std::ofstream f(dir.path / "bad.txt");
    f << "name=x\nfake.png\n";
  }
  CHECK_THROWS(read_manifest((dir.path / "bad.txt").string()));
  CHECK_THROWS_AS(parse_role("validation"), FormatError);
}

TEST_CASE("sampler: deterministic, distinct queries, consistent targets") {
  const auto hr = testing::random_image(3, 60, 50, 4);
  const std::vector<ImageTensor> refs{testing::random_image(3, 20, 30, 5)};
  const SamplerConfig cfg{8, 40, 10, 1.0, 4.0, false};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    const auto s = sample_training_pair(hr, refs, cfg, a);
    const auto t = sample_training_pair(hr, refs, cfg, b);
    REQUIRE(s.has_value());
    REQUIRE(t.has_value());
    CHECK(s->scale == t->scale);
    CHECK(s->rgb_targets == t->rgb_targets);
    CHECK(same_pixels(s->lr_patch, t->lr_patch));
    CHECK(s->lr_patch.height() == 8);
    CHECK(s->hr_size == std::lround(8 * s->scale));
    CHECK(s->coords.size() == 40);
    CHECK(s->reference.height() == 10);
    CHECK(s->reference.width() == 10);
    std::set<std::pair<double, double>> unique;
    for (const auto& c : s->coords.coords) {
      unique.insert({c[0], c[1]});
      CHECK((std::abs(c[0]) < 1 && std::abs(c[1]) < 1));
    }
    CHECK(unique.size() == 40);
    for (const auto& cell : s->coords.cells) CHECK(cell[0] == doctest::Approx(2.0 / s->hr_size));
  }
}

TEST_CASE("sampler: scales are uniform over the configured range") {
  const auto hr = testing::random_image(3, 40, 40, 4);
  const SamplerConfig cfg{8, 4, 8, 1.0, 4.0, false};
  std::vector<double> scales;
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) scales.push_back(sample_training_pair(hr, {}, cfg, rng)->scale);
  std::sort(scales.begin(), scales.end());
  double d = 0;
  const double n = static_cast<double>(scales.size());
  for (std::size_t i = 0; i < scales.size(); ++i) {
    const double f = (scales[i] - 1.0) / 3.0;
    d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  // Kolmogorov-Smirnov critical value at the 1% level.
  CHECK(d < 1.63 / std::sqrt(n));
}

TEST_CASE("sampler: gives up on images too small for any crop") {
  const auto hr = testing::random_image(3, 10, 10, 4);
  const SamplerConfig cfg{8, 4, 8, 2.0, 4.0, false};
  Rng rng(1);
  CHECK_FALSE(sample_training_pair(hr, {}, cfg, rng).has_value());
  const SamplerConfig ok{8, 4, 8, 1.0, 1.0, false};
  const auto s = sample_training_pair(hr, {}, ok, rng);
  REQUIRE(s.has_value());
  CHECK(s->reference.height() == 8);  // no pool: the patch is its own reference
}

TEST_CASE("gaussian noise has the requested spread") {
  const ImageTensor gray(3, 100, 100, ValueRange::kUnit, 0.5f);
  Rng rng(3);
  const auto noisy = add_gaussian_noise(gray, 1.5, rng);
  double s = 0, s2 = 0;
  for (float v : noisy.data()) {
    s += v - 0.5;
    s2 += (v - 0.5) * (v - 0.5);
  }
  const double n = static_cast<double>(noisy.size());
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  CHECK(sd == doctest::Approx(1.5 / 255).epsilon(0.03));
  Rng r2(3);
  const auto unit = add_gaussian_noise(gray, 0.01, r2, NoiseScale::kUnit);
  CHECK(noisy.in_range());
  CHECK(unit.data()[0] != 0.5f);
  Rng r3(3);
  CHECK(same_pixels(add_gaussian_noise(gray, 0.0, r3), gray));
  CHECK_THROWS_AS(add_gaussian_noise(gray, -1.0, r3), ArgumentError);
}

TEST_CASE("eval pairs crop HR so the LR side scales back exactly") {
  const ImageTensor odd(3, 101, 101);
  auto p = make_eval_pair(odd, 2.0);
  CHECK(p.lr.height() == 50);
  CHECK(p.hr.height() == 100);
  const ImageTensor big(3, 720, 720);
  p = make_eval_pair(big, 18.0);
  CHECK(p.lr.height() == 40);
  CHECK(p.hr.height() == 720);
  p = make_eval_pair(big, 3.0);
  CHECK(p.lr.height() == 240);
  p = make_eval_pair(odd, 2.5);
  CHECK(p.lr.height() == 40);
  CHECK(p.hr.height() == 100);
  const auto img = testing::random_image(3, 9, 7, 2);
  p = make_eval_pair(img, 1.0);
  CHECK(same_pixels(p.lr, img));
  CHECK(same_pixels(p.hr, img));
}

TEST_CASE("batch stream: epochs are permutations, state restores the continuation") {
  std::vector<ImageTensor> imgs;
  for (int i = 0; i < 5; ++i) imgs.push_back(testing::random_image(3, 20, 20, 100 + i));
  const SamplerConfig cfg{6, 10, 6, 1.0, 3.0, false};
  BatchStream a(imgs, {}, cfg, 3, 42), b(imgs, {}, cfg, 3, 42);
  for (std::uint64_t e = 0; e < 3; ++e) {
    std::set<std::size_t> seen;
    for (std::uint64_t p = 0; p < 5; ++p) seen.insert(a.image_at(e, p));
    CHECK(seen.size() == 5);
  }
  for (int i = 0; i < 4; ++i) a.next();
  const auto saved = a.state();
  CHECK(saved.counter == 12);
  const auto expect = a.next();
  b.restore(saved);
  const auto got = b.next();
  REQUIRE(got.size() == 3);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].rgb_targets == expect[i].rgb_targets);
    CHECK(same_pixels(got[i].lr_patch, expect[i].lr_patch));
  }
  BatchStream c(imgs, {}, cfg, 3, 43);
  CHECK(c.next()[0].rgb_targets != BatchStream(imgs, {}, cfg, 3, 42).next()[0].rgb_targets);
}
