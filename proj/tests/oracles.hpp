// Brute-force reference implementations used to check the fast paths. They
// share no code with the library beyond the plain data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct Counts {
  std::size_t both = 0, pred = 0, gt = 0;
};

inline Counts pixel_counts(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& gt,
                           std::int32_t label) {
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] == label, b = gt[i] == label;
    if (a && b) ++c.both;
    if (a) ++c.pred;
    if (b) ++c.gt;
  }
  return c;
}

inline double dice(const Counts& c) {
  if (c.pred + c.gt == 0) return 1.0;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.pred + c.gt);
}

/// Binary Dice on "label != 0".
inline double dsc_binary(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& gt) {
  std::vector<std::int32_t> p(pred.size()), g(gt.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p[i] = pred[i] != 0;
    g[i] = gt[i] != 0;
  }
  return dice(pixel_counts(p, g, 1));
}

/// Mean Dice over foreground labels 1..classes-1.
inline double dsc_multiclass(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& gt,
                             int classes) {
  double s = 0;
  for (int c = 1; c < classes; ++c) s += dice(pixel_counts(pred, gt, c));
  return s / (classes - 1);
}

/// Foreground pixels (label != 0) touching background or the image edge
/// through a 4-neighbor.
inline std::vector<std::pair<int, int>> boundary(const std::vector<std::int32_t>& m, int w, int h) {
  std::vector<std::pair<int, int>> out;
  auto inside = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return false;
    return m[static_cast<std::size_t>(y) * w + x] != 0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!inside(x, y)) continue;
      const bool edge = !inside(x + 1, y) || !inside(x - 1, y) || !inside(x, y + 1) || !inside(x, y - 1);
      if (edge) out.emplace_back(x, y);
    }
  }
  return out;
}

inline std::vector<double> directed(const std::vector<std::pair<int, int>>& from,
                                    const std::vector<std::pair<int, int>>& to) {
  std::vector<double> d;
  for (const auto& [ax, ay] : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [bx, by] : to) best = std::min(best, std::hypot(double(ax - bx), double(ay - by)));
    d.push_back(best);
  }
  return d;
}

inline double hausdorff(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& gt, int w, int h) {
  const auto bp = boundary(pred, w, h), bg = boundary(gt, w, h);
  double m = 0;
  for (double v : directed(bp, bg)) m = std::max(m, v);
  for (double v : directed(bg, bp)) m = std::max(m, v);
  return m;
}

inline double assd(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& gt, int w, int h) {
  const auto bp = boundary(pred, w, h), bg = boundary(gt, w, h);
  const auto a = directed(bp, bg), b = directed(bg, bp);
  const double s = std::accumulate(a.begin(), a.end(), 0.0) + std::accumulate(b.begin(), b.end(), 0.0);
  return s / static_cast<double>(a.size() + b.size());
}

/// Full sort by descending score; stable so equal scores keep input order.
inline std::vector<std::size_t> ranked(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

/// Conformal threshold for alpha = a/1000: the k-th smallest score with
/// k = ceil((1000-a)(n+1)/1000), or +inf when k > n. Integer arithmetic only.
inline double threshold(std::vector<double> scores, int alpha_per_mille) {
  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  const std::int64_t num = (1000 - alpha_per_mille) * (n + 1);
  const std::int64_t k = (num + 999) / 1000;
  if (k > n) return std::numeric_limits<double>::infinity();
  std::sort(scores.begin(), scores.end());
  return scores[static_cast<std::size_t>(std::max<std::int64_t>(k, 1) - 1)];
}

/// p-quantile as the ceil(p*m)-th smallest; p = num/den exactly.
inline double quantile(std::vector<double> v, std::int64_t num, std::int64_t den) {
  std::sort(v.begin(), v.end());
  const std::int64_t m = static_cast<std::int64_t>(v.size());
  std::int64_t k = (num * m + den - 1) / den;
  k = std::clamp<std::int64_t>(k, 1, m);
  return v[static_cast<std::size_t>(k - 1)];
}

/// Grid points y in [0,1] (step 0.001) with max(lo - y, y - hi) <= q_hat.
/// Returns {first, last} or {1, 0} when none qualify.
inline std::pair<double, double> inversion_scan(double lo, double hi, double q_hat) {
  double first = 1, last = 0;
  bool any = false;
  for (int i = 0; i <= 1000; ++i) {
    const double y = i / 1000.0;
    if (std::max(lo - y, y - hi) <= q_hat) {
      if (!any) first = y;
      last = y;
      any = true;
    }
  }
  return {first, last};
}

}  // namespace oracle

namespace oracle {

inline double cosine(const std::vector<float>& u, const std::vector<float>& v) {
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += static_cast<double>(u[i]) * v[i];
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
  }
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

}  // namespace oracle
