#include "segqc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "segqc/errors.hpp"

namespace segqc {

namespace {

constexpr double kFar = 1e30;

void require_same(const LabelMask& a, const LabelMask& b) {
  if (!same_dims(a, b)) {
    throw DataError("mask dimensions differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

// Lower envelope of parabolas; f and d have stride 1 and length n.
void edt_1d(const double* f, int n, double* d, std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect = [&](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

// Directed boundary-to-boundary distances from each boundary pixel of `from`
// to the boundary of `to`.
std::vector<double> directed_distances(const std::vector<int>& from, const std::vector<double>& to_sq_dt) {
  std::vector<double> out;
  out.reserve(from.size());
  for (int idx : from) out.push_back(std::sqrt(to_sq_dt[idx]));
  return out;
}

struct BoundaryPair {
  std::vector<double> pred_to_gt;
  std::vector<double> gt_to_pred;
};

BoundaryPair boundary_distances(const LabelMask& pred, const LabelMask& gt) {
  require_same(pred, gt);
  auto bp = boundary_indices(pred);
  auto bg = boundary_indices(gt);
  if (bp.empty() || bg.empty()) {
    throw UndefinedMetricError("boundary distance is undefined for an empty foreground");
  }
  const auto dt_pred = squared_distance_transform(pred.width(), pred.height(), bp);
  const auto dt_gt = squared_distance_transform(gt.width(), gt.height(), bg);
  return {directed_distances(bp, dt_gt), directed_distances(bg, dt_pred)};
}

}  // namespace

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Dsc: return "dsc";
    case MetricKind::Hausdorff: return "hausdorff";
    case MetricKind::Assd: return "assd";
  }
  return "unknown";
}

MetricKind parse_metric(std::string_view name) {
  if (name == "dsc" || name == "dice") return MetricKind::Dsc;
  if (name == "hausdorff") return MetricKind::Hausdorff;
  if (name == "assd") return MetricKind::Assd;
  throw UsageError("unknown metric '" + std::string(name) + "' (expected dsc, hausdorff or assd)");
}

bool higher_is_better(MetricKind kind) { return kind == MetricKind::Dsc; }

double dsc_binary(const LabelMask& pred, const LabelMask& gt) {
  require_same(pred, gt);
  std::size_t tp = 0, fp = 0, fn = 0;
  auto p = pred.labels();
  auto g = gt.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] != 0;
    const bool b = g[i] != 0;
    tp += a && b;
    fp += a && !b;
    fn += !a && b;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * tp) / static_cast<double>(denom);
}

double dsc_multiclass(const LabelMask& pred, const LabelMask& gt) {
  require_same(pred, gt);
  if (pred.class_count() != gt.class_count()) {
    throw DataError("class counts differ: " + std::to_string(pred.class_count()) + " vs " +
                    std::to_string(gt.class_count()));
  }
  const int classes = pred.class_count();
  std::vector<std::size_t> tp(classes), np(classes), ng(classes);
  auto p = pred.labels();
  auto g = gt.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++np[p[i]];
    ++ng[g[i]];
    if (p[i] == g[i]) ++tp[p[i]];
  }
  double sum = 0.0;
  for (int c = 1; c < classes; ++c) {
    const std::size_t denom = np[c] + ng[c];
    sum += denom == 0 ? 1.0 : static_cast<double>(2 * tp[c]) / static_cast<double>(denom);
  }
  return sum / (classes - 1);
}

std::vector<int> boundary_indices(const LabelMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  auto fg = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && mask.at(x, y) != 0; };
  std::vector<int> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(x, y)) continue;
      if (!fg(x - 1, y) || !fg(x + 1, y) || !fg(x, y - 1) || !fg(x, y + 1)) out.push_back(y * w + x);
    }
  }
  return out;
}

std::vector<double> squared_distance_transform(int width, int height, const std::vector<int>& seeds) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> grid(n, kFar);
  for (int idx : seeds) grid[idx] = 0.0;

  const int longest = std::max(width, height);
  std::vector<int> v(longest);
  std::vector<double> z(longest + 1);
  std::vector<double> line(longest), out(longest);

  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) line[y] = grid[static_cast<std::size_t>(y) * width + x];
    edt_1d(line.data(), height, out.data(), v, z);
    for (int y = 0; y < height; ++y) grid[static_cast<std::size_t>(y) * width + x] = out[y];
  }
  for (int y = 0; y < height; ++y) {
    double* row = grid.data() + static_cast<std::size_t>(y) * width;
    std::copy(row, row + width, line.begin());
    edt_1d(line.data(), width, row, v, z);
  }
  for (double& d : grid) {
    if (d >= kFar / 2) d = std::numeric_limits<double>::infinity();
  }
  return grid;
}

double hausdorff(const LabelMask& pred, const LabelMask& gt) {
  auto d = boundary_distances(pred, gt);
  double m = 0.0;
  for (double v : d.pred_to_gt) m = std::max(m, v);
  for (double v : d.gt_to_pred) m = std::max(m, v);
  return m;
}

double assd(const LabelMask& pred, const LabelMask& gt) {
  auto d = boundary_distances(pred, gt);
  double sum = 0.0;
  for (double v : d.pred_to_gt) sum += v;
  for (double v : d.gt_to_pred) sum += v;
  return sum / static_cast<double>(d.pred_to_gt.size() + d.gt_to_pred.size());
}

double evaluate_metric(MetricKind kind, const LabelMask& pred, const LabelMask& gt) {
  if (kind == MetricKind::Dsc) return dsc_multiclass(pred, gt);
  require_same(pred, gt);
  if (pred.class_count() != gt.class_count()) throw DataError("class counts differ");

  double sum = 0.0;
  int used = 0;
  for (int c = 1; c < pred.class_count(); ++c) {
    const auto bp = pred.binary(c);
    const auto bg = gt.binary(c);
    const bool empty_p = bp.count(1) == 0;
    const bool empty_g = bg.count(1) == 0;
    if (empty_p && empty_g) continue;
    sum += kind == MetricKind::Hausdorff ? hausdorff(bp, bg) : assd(bp, bg);
    ++used;
  }
  if (used == 0) throw UndefinedMetricError(to_string(kind) + " is undefined: no foreground in either mask");
  return sum / used;
}

}  // namespace segqc
