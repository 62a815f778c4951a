// Copyright 2026 The histoseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <set>

#include "histoseg/augmentor.hpp"
#include "histoseg/errors.hpp"
#include "support.hpp"

using namespace histoseg;

namespace {

AugmentConfig nothing() {
  AugmentConfig cfg;
  cfg.p_mirror = cfg.p_rotate = cfg.p_scale = cfg.p_elastic = cfg.p_intensity = cfg.p_noise = 0.0;
  return cfg;
}

FloatImage random_image(SplitMix64& rng, int h, int w) {
  FloatImage img(h, w, 3);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

std::multiset<Superclass> multiset_of(const ClassMap& m) { return {m.data().begin(), m.data().end()}; }
std::set<Superclass> set_of(const ClassMap& m) { return {m.data().begin(), m.data().end()}; }

ClassMap labels(int h, int w, std::initializer_list<int> values) {
  ClassMap m(h, w);
  std::size_t i = 0;
  for (int v : values) m.data()[i++] = static_cast<Superclass>(v);
  return m;
}

}  // namespace

TEST_SUITE("augmentor") {

TEST_CASE("zero quarter turns is the identity") {
  SplitMix64 rng(1);
  const FloatImage img = random_image(rng, 5, 7);
  const ClassMap mask = testing::random_class_map(rng, 5, 7);
  const auto [a, b] = apply_spatial(img, mask, Rotate90{0});
  CHECK(a == img);
  CHECK(b == mask);
}

TEST_CASE("mirror is an involution on both axes") {
  SplitMix64 rng(2);
  const FloatImage img = random_image(rng, 4, 6);
  const ClassMap mask = testing::random_class_map(rng, 4, 6);
  for (int axis : {0, 1}) {
    const auto once = apply_spatial(img, mask, Mirror{axis});
    CHECK_FALSE(once.second == mask);
    const auto twice = apply_spatial(once.first, once.second, Mirror{axis});
    CHECK(twice.first == img);
    CHECK(twice.second == mask);
  }
  const auto flipped = apply_spatial(img, mask, Mirror{1});
  CHECK(flipped.second.at(0, 0) == mask.at(0, 5));
  CHECK(flipped.first.at(2, 1, 2) == img.at(2, 4, 2));
}

TEST_CASE("quarter turn clockwise on a 2x2 mask") {
  const ClassMap m = labels(2, 2, {1, 2, 3, 0});
  const auto [img, out] = apply_spatial(FloatImage(2, 2, 3), m, Rotate90{1});
  CHECK(out == labels(2, 2, {3, 1, 0, 2}));
  CHECK(multiset_of(out) == multiset_of(m));
}

TEST_CASE("quarter turns compose and preserve label multisets") {
  SplitMix64 rng(3);
  const FloatImage img = random_image(rng, 3, 5);
  const ClassMap mask = testing::random_class_map(rng, 3, 5);
  const auto one = apply_spatial(img, mask, Rotate90{1});
  CHECK(one.second.height() == 5);
  CHECK(one.second.width() == 3);
  CHECK(multiset_of(one.second) == multiset_of(mask));
  auto cur = std::pair{img, mask};
  for (int i = 0; i < 4; ++i) cur = apply_spatial(cur.first, cur.second, Rotate90{1});
  CHECK(cur.first == img);
  CHECK(cur.second == mask);
  const auto three = apply_spatial(img, mask, Rotate90{3});
  const auto back = apply_spatial(three.first, three.second, Rotate90{1});
  CHECK(back.second == mask);
}

TEST_CASE("scale, free rotation and elastic keep shape and never invent labels") {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const FloatImage img = random_image(rng, 12, 12);
    ClassMap mask(12, 12);
    for (auto& v : mask.data()) v = static_cast<Superclass>(1 + rng.below(2));
    const std::vector<SpatialOp> ops = {Scale{rng.uniform(0.5, 1.5)}, Rotate{rng.uniform(-45.0, 45.0)},
                                        make_elastic_field(12, 12, 10.0, 4.0, rng.next())};
    for (const auto& op : ops) {
      const auto [a, b] = apply_spatial(img, mask, op);
      CHECK(a.height() == 12);
      CHECK(b.width() == 12);
      const auto before = set_of(mask);
      for (auto v : b.data()) CHECK(before.contains(v));
      for (float v : a.data()) CHECK((v >= 0.0f && v <= 1.0f));
    }
  }
}

TEST_CASE("unit scale and zero displacement are identities") {
  SplitMix64 rng(5);
  const FloatImage img = random_image(rng, 6, 6);
  const ClassMap mask = testing::random_class_map(rng, 6, 6);
  auto s = apply_spatial(img, mask, Scale{1.0});
  CHECK(s.second == mask);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(s.first.data()[i] == doctest::Approx(img.data()[i]));
  auto e = apply_spatial(img, mask, Elastic{Raster<float>(6, 6), Raster<float>(6, 6)});
  CHECK(e.second == mask);
  auto r = apply_spatial(img, mask, Rotate{0.0});
  CHECK(r.second == mask);
}

TEST_CASE("elastic field is seeded and scaled by alpha") {
  const Elastic a = make_elastic_field(16, 16, 10.0, 4.0, 9);
  const Elastic b = make_elastic_field(16, 16, 10.0, 4.0, 9);
  CHECK(a.dx == b.dx);
  CHECK(a.dy == b.dy);
  const Elastic c = make_elastic_field(16, 16, 20.0, 4.0, 9);
  for (std::size_t i = 0; i < a.dx.size(); ++i) {
    CHECK(c.dx.data()[i] == doctest::Approx(2.0 * a.dx.data()[i]).epsilon(1e-5));
  }
  const Elastic zero = make_elastic_field(8, 8, 0.0, 4.0, 9);
  for (float v : zero.dx.data()) CHECK(v == 0.0f);
}

TEST_CASE("spatial ops reject mismatched shapes") {
  CHECK_THROWS_AS(apply_spatial(FloatImage(2, 2, 3), ClassMap(2, 3), Mirror{}), Error);
}

TEST_CASE("neutral intensity ops are identities") {
  SplitMix64 rng(6);
  const FloatImage img = random_image(rng, 4, 4);
  const std::vector<IntensityOp> ops = {Brightness{0.0}, Contrast{1.0}, Gamma{1.0}, GaussianNoise{0.0, 3}};
  for (const auto& op : ops) {
    const FloatImage out = apply_intensity(img, op);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(out.data()[i] == doctest::Approx(img.data()[i]));
  }
}

TEST_CASE("intensity arithmetic") {
  const FloatImage half(1, 1, 3, 0.5f);
  CHECK(apply_intensity(half, Gamma{2.0}).at(0, 0) == doctest::Approx(0.25));
  CHECK(apply_intensity(half, Brightness{0.8}).at(0, 0) == 1.0f);
  CHECK(apply_intensity(half, Brightness{-0.8}).at(0, 0) == 0.0f);
  const FloatImage quarter(1, 1, 3, 0.25f);
  CHECK(apply_intensity(quarter, Contrast{2.0}).at(0, 0) == doctest::Approx(0.0));
  CHECK(apply_intensity(quarter, Contrast{0.5}).at(0, 0) == doctest::Approx(0.375));
  const FloatImage noisy = apply_intensity(FloatImage(8, 8, 3, 0.5f), GaussianNoise{0.05, 1});
  CHECK(noisy == apply_intensity(FloatImage(8, 8, 3, 0.5f), GaussianNoise{0.05, 1}));
  CHECK_FALSE(noisy == FloatImage(8, 8, 3, 0.5f));
}

TEST_CASE("all probabilities zero leaves the pair untouched") {
  SplitMix64 rng(7);
  const FloatImage img = random_image(rng, 9, 9);
  const ClassMap mask = testing::random_class_map(rng, 9, 9);
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    const auto [a, b] = augment_pair(img, mask, nothing(), draw);
    CHECK(a == img);
    CHECK(b == mask);
  }
}

TEST_CASE("augmentation is deterministic in seed and draw index") {
  SplitMix64 rng(8);
  const FloatImage img = random_image(rng, 16, 16);
  const ClassMap mask = testing::random_class_map(rng, 16, 16);
  AugmentConfig cfg;
  cfg.seed = 99;
  cfg.p_elastic = cfg.p_scale = 1.0;
  const auto a = augment_pair(img, mask, cfg, 3);
  const auto b = augment_pair(img, mask, cfg, 3);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  const auto c = augment_pair(img, mask, cfg, 4);
  CHECK_FALSE(c.first == a.first);
}

TEST_CASE("mirror only applies exactly one mirror") {
  SplitMix64 rng(9);
  const FloatImage img = random_image(rng, 6, 8);
  const ClassMap mask = testing::random_class_map(rng, 6, 8);
  AugmentConfig cfg = nothing();
  cfg.p_mirror = 1.0;
  cfg.seed = 12;
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    const auto [a, b] = augment_pair(img, mask, cfg, draw);
    CHECK(multiset_of(b) == multiset_of(mask));
    const auto v = apply_spatial(img, mask, Mirror{0});
    const auto h = apply_spatial(img, mask, Mirror{1});
    CHECK(((a == v.first && b == v.second) || (a == h.first && b == h.second)));
  }
}

TEST_CASE("intensity-only augmentation leaves the mask bitwise equal") {
  SplitMix64 rng(10);
  const FloatImage img = random_image(rng, 8, 8);
  const ClassMap mask = testing::random_class_map(rng, 8, 8);
  AugmentConfig cfg = nothing();
  cfg.p_intensity = cfg.p_noise = 1.0;
  const auto [a, b] = augment_pair(img, mask, cfg, 0);
  CHECK(b == mask);
  CHECK_FALSE(a == img);
}

TEST_CASE("draw sequence does not depend on which transforms fire") {
  SplitMix64 rng(11);
  FloatImage img(8, 8, 3);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform(0.3, 0.7));
  const ClassMap mask = testing::random_class_map(rng, 8, 8);
  AugmentConfig noise_only = nothing();
  noise_only.p_noise = 1.0;
  noise_only.seed = 5;
  AugmentConfig mirror_only = nothing();
  mirror_only.p_mirror = 1.0;
  mirror_only.seed = 5;
  AugmentConfig both = noise_only;
  both.p_mirror = 1.0;

  const auto noisy = augment_pair(img, mask, noise_only, 2);
  const auto mirrored = augment_pair(img, mask, mirror_only, 2);
  const auto combined = augment_pair(img, mask, both, 2);
  CHECK(combined.second == mirrored.second);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double noise_a = noisy.first.data()[i] - img.data()[i];
    const double noise_b = combined.first.data()[i] - mirrored.first.data()[i];
    CHECK(noise_a == doctest::Approx(noise_b).epsilon(1e-5));
  }
}

TEST_CASE("config validation") {
  AugmentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.p_mirror = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.gamma_range = {0.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.contrast_range = {1.2, 1.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.noise_sigma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

}  // TEST_SUITE
