#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "segqc/errors.hpp"
#include "segqc/metrics.hpp"
#include "segqc/rng.hpp"

using namespace segqc;

namespace {

LabelMask random_mask(int w, int h, int classes, double fill, Rng& rng) {
  std::vector<LabelMask::Label> v(static_cast<std::size_t>(w) * h);
  for (auto& l : v) l = rng.uniform() < fill ? static_cast<LabelMask::Label>(1 + rng.below(classes - 1)) : 0;
  return LabelMask(w, h, classes, std::move(v));
}

std::vector<std::int32_t> raw(const LabelMask& m) { return {m.labels().begin(), m.labels().end()}; }

LabelMask single(int w, int h, std::vector<int> on) {
  std::vector<LabelMask::Label> v(static_cast<std::size_t>(w) * h, 0);
  for (int i : on) v[i] = 1;
  return LabelMask(w, h, 2, std::move(v));
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("dsc hand examples") {
    const auto a = single(4, 1, {0, 1});
    const auto b = single(4, 1, {1, 2});
    const auto c = single(4, 1, {3});
    CHECK(dsc_binary(a, a) == 1.0);
    CHECK(dsc_binary(a, c) == 0.0);
    CHECK(dsc_binary(a, b) == 0.5);
    const auto empty = LabelMask::filled(4, 1, 2);
    CHECK(dsc_binary(empty, empty) == 1.0);
    CHECK(dsc_binary(empty, a) == 0.0);
  }

  TEST_CASE("multiclass dsc is the foreground macro average") {
    const LabelMask same(3, 1, 3, {0, 1, 2});
    CHECK(dsc_multiclass(same, same) == 1.0);
    // class 1 agrees, class 2 disjoint
    const LabelMask p(4, 1, 3, {1, 2, 0, 0});
    const LabelMask g(4, 1, 3, {1, 0, 2, 0});
    CHECK(dsc_multiclass(p, g) == 0.5);
  }

  TEST_CASE("multiclass dsc matches the per-class counting oracle") {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
      const auto p = random_mask(8, 8, 3, 0.5, rng);
      const auto g = random_mask(8, 8, 3, 0.5, rng);
      CHECK(dsc_multiclass(p, g) == oracle::dsc_multiclass(raw(p), raw(g), 3));
    }
  }

  TEST_CASE("distances on singletons and identical masks") {
    const auto a = single(8, 1, {1});
    const auto b = single(8, 1, {6});
    CHECK(hausdorff(a, b) == 5.0);
    CHECK(assd(a, b) == 5.0);
    Rng rng(3);
    const auto m = random_mask(16, 16, 2, 0.4, rng);
    CHECK(hausdorff(m, m) == 0.0);
    CHECK(assd(m, m) == 0.0);
  }

  TEST_CASE("empty foreground makes distances undefined") {
    const auto empty = LabelMask::filled(4, 4, 2);
    const auto a = single(4, 4, {5});
    CHECK_THROWS_AS(hausdorff(empty, a), UndefinedMetricError);
    CHECK_THROWS_AS(assd(a, empty), UndefinedMetricError);
    CHECK_THROWS_AS(evaluate_metric(MetricKind::Hausdorff, empty, empty), UndefinedMetricError);
  }

  TEST_CASE("distances match the all-pairs oracle") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
      const auto p = random_mask(16, 16, 2, 0.2 + 0.5 * rng.uniform(), rng);
      const auto g = random_mask(16, 16, 2, 0.2 + 0.5 * rng.uniform(), rng);
      if (p.count(1) == 0 || g.count(1) == 0) continue;
      CHECK(hausdorff(p, g) == doctest::Approx(oracle::hausdorff(raw(p), raw(g), 16, 16)).epsilon(1e-12));
      CHECK(assd(p, g) == doctest::Approx(oracle::assd(raw(p), raw(g), 16, 16)).epsilon(1e-12));
    }
  }

  TEST_CASE("distance transform is exact against brute force") {
    Rng rng(9);
    const int w = 13, h = 7;
    std::vector<int> seeds;
    for (int i = 0; i < w * h; ++i) {
      if (rng.uniform() < 0.05) seeds.push_back(i);
    }
    seeds.push_back(0);
    const auto dt = squared_distance_transform(w, h, seeds);
    for (int i = 0; i < w * h; ++i) {
      double best = 1e300;
      for (int s : seeds) {
        const double dx = i % w - s % w, dy = i / w - s / w;
        best = std::min(best, dx * dx + dy * dy);
      }
      CHECK(dt[i] == best);
    }
    CHECK(std::isinf(squared_distance_transform(3, 3, {})[4]));
  }

  TEST_CASE("boundary counts image edges as outside") {
    const auto full = LabelMask::filled(3, 3, 2, 1);
    CHECK(boundary_indices(full).size() == 8);
  }

  TEST_CASE("evaluate_metric averages distances over classes present") {
    // class 1 identical, class 2 offset by two pixels
    const LabelMask p(6, 1, 3, {1, 0, 2, 0, 0, 0});
    const LabelMask g(6, 1, 3, {1, 0, 0, 0, 2, 0});
    CHECK(evaluate_metric(MetricKind::Hausdorff, p, g) == 1.0);
    CHECK(evaluate_metric(MetricKind::Dsc, p, g) == 0.5);
  }

  TEST_CASE("metric names") {
    CHECK(parse_metric("dice") == MetricKind::Dsc);
    CHECK(to_string(MetricKind::Assd) == "assd");
    CHECK_THROWS_AS(parse_metric("iou"), UsageError);
    CHECK(higher_is_better(MetricKind::Dsc));
    CHECK_FALSE(higher_is_better(MetricKind::Hausdorff));
  }

  TEST_CASE("mismatched shapes are rejected") {
    CHECK_THROWS_AS(dsc_binary(LabelMask::filled(2, 2, 2), LabelMask::filled(3, 2, 2)), DataError);
  }
}
