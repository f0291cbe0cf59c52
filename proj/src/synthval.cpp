#include "segqc/synthval.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "segqc/errors.hpp"
#include "segqc/io.hpp"

namespace segqc {

double sample_beta22(Rng& rng) {
  double u[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
  std::sort(u, u + 3);
  return u[1];
}

std::vector<double> synth_score_set(double y_true, std::size_t m, double sigma, Rng& rng) {
  if (!(y_true >= 0 && y_true <= 1)) throw UsageError("y_true must lie in [0,1]");
  if (!(sigma >= 0)) throw UsageError("noise sigma must be non-negative");
  std::vector<double> out(m);
  for (auto& v : out) v = std::clamp(y_true + sigma * rng.normal(), 0.0, 1.0);
  return out;
}

void SyntheticConfig::validate() const {
  if (n_cal < 1 || n_test < 1 || ref_size < 1) throw UsageError("synthetic sizes must be >= 1");
  if (!(noise_sigma >= 0)) throw UsageError("noise sigma must be non-negative");
  CalibrationOptions{alpha, p_low, p_high}.validate();
}

TrialResult run_synthetic_trial(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t total = cfg.n_cal + cfg.n_test;
  std::vector<CalibrationRecord> cases(total);
  for (std::size_t i = 0; i < total; ++i) {
    cases[i].id = std::to_string(i);
    cases[i].truth = sample_beta22(rng);
    cases[i].scores = synth_score_set(cases[i].truth, cfg.ref_size, cfg.noise_sigma, rng);
  }

  CalibrationOptions opts;
  opts.alpha = cfg.alpha;
  opts.p_low = cfg.p_low;
  opts.p_high = cfg.p_high;
  const auto calib = calibrate(std::span(cases).first(cfg.n_cal), opts);

  std::vector<PredictionInterval> intervals;
  std::vector<double> truths;
  intervals.reserve(cfg.n_test);
  truths.reserve(cfg.n_test);
  double width_sum = 0;
  for (std::size_t i = cfg.n_cal; i < total; ++i) {
    intervals.push_back(predict_interval(cases[i].scores, calib));
    truths.push_back(cases[i].truth);
    width_sum += intervals.back().width();
  }
  return {cfg.seed, empirical_coverage(intervals, truths), width_sum / static_cast<double>(cfg.n_test), calib.q_hat};
}

LabelMask erode(const LabelMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<LabelMask::Label> out(mask.labels().begin(), mask.labels().end());
  auto label_at = [&](int x, int y) { return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : mask.at(x, y); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto l = mask.at(x, y);
      if (l == 0) continue;
      if (label_at(x - 1, y) != l || label_at(x + 1, y) != l || label_at(x, y - 1) != l || label_at(x, y + 1) != l) {
        out[static_cast<std::size_t>(y) * w + x] = 0;
      }
    }
  }
  return LabelMask(w, h, mask.class_count(), std::move(out));
}

LabelMask dilate(const LabelMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<LabelMask::Label> out(mask.labels().begin(), mask.labels().end());
  auto label_at = [&](int x, int y) { return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : mask.at(x, y); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(x, y) != 0) continue;
      // First foreground 4-neighbor in left, right, up, down order.
      for (auto l : {label_at(x - 1, y), label_at(x + 1, y), label_at(x, y - 1), label_at(x, y + 1)}) {
        if (l != 0) {
          out[static_cast<std::size_t>(y) * w + x] = l;
          break;
        }
      }
    }
  }
  return LabelMask(w, h, mask.class_count(), std::move(out));
}

LabelMask translate(const LabelMask& mask, int dx, int dy) {
  const int w = mask.width(), h = mask.height();
  std::vector<LabelMask::Label> out(mask.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sx = x - dx, sy = y - dy;
      if (sx >= 0 && sy >= 0 && sx < w && sy < h) out[static_cast<std::size_t>(y) * w + x] = mask.at(sx, sy);
    }
  }
  return LabelMask(w, h, mask.class_count(), std::move(out));
}

LabelMask degrade_mask(const LabelMask& mask, int severity, Rng& rng) {
  if (severity < 0) throw UsageError("severity must be >= 0");
  if (severity == 0) return mask;
  // The size direction and shift direction are fixed per call, so later rounds
  // never undo earlier ones and quality falls steadily with severity.
  static constexpr int kDx[4] = {1, -1, 0, 0};
  static constexpr int kDy[4] = {0, 0, 1, -1};
  const bool grow = rng.below(2) == 1;
  const auto dir = rng.below(4);
  LabelMask out = mask;
  for (int round = 0; round < severity; ++round) {
    if (rng.below(3) < 2) {
      out = grow ? dilate(out) : erode(out);
    } else {
      out = translate(out, kDx[dir], kDy[dir]);
    }
  }
  return out;
}

LabelMask ellipse_mask(int width, int height, double cx, double cy, double rx, double ry) {
  std::vector<LabelMask::Label> labels(static_cast<std::size_t>(width) * height, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x - cx) / rx, v = (y - cy) / ry;
      if (u * u + v * v <= 1.0) labels[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }
  return LabelMask(width, height, 2, std::move(labels));
}

GrayImage render_phantom(const LabelMask& mask, Rng& rng) {
  const int w = mask.width(), h = mask.height();
  const double fg = 0.65 + 0.1 * rng.uniform();
  const double bg = 0.15 + 0.1 * rng.uniform();
  std::vector<double> raw(mask.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = (mask.labels()[i] != 0 ? fg : bg) + 0.02 * rng.normal();
  }
  // 3x3 box blur softens edges so the registration objective is smooth.
  std::vector<double> out(raw.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      int n = 0;
      for (int yy = std::max(0, y - 1); yy <= std::min(h - 1, y + 1); ++yy) {
        for (int xx = std::max(0, x - 1); xx <= std::min(w - 1, x + 1); ++xx) {
          s += raw[static_cast<std::size_t>(yy) * w + xx];
          ++n;
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = std::clamp(s / n, 0.0, 1.0);
    }
  }
  return GrayImage(w, h, std::move(out));
}

namespace {

PhantomCase random_phantom(const std::string& id, int size, Rng& rng) {
  const double r = size * (0.15 + 0.12 * rng.uniform());
  const double rx = r * (0.85 + 0.3 * rng.uniform());
  const double ry = r * (0.85 + 0.3 * rng.uniform());
  const double margin = std::max(rx, ry) + 2;
  const double cx = margin + (size - 1 - 2 * margin) * rng.uniform();
  const double cy = margin + (size - 1 - 2 * margin) * rng.uniform();
  PhantomCase c;
  c.id = id;
  c.gt = ellipse_mask(size, size, cx, cy, rx, ry);
  c.image = render_phantom(c.gt, rng);
  c.prediction = c.gt;
  return c;
}

std::string padded(const std::string& prefix, std::size_t i) {
  std::ostringstream ss;
  ss << prefix << (i < 10 ? "00" : i < 100 ? "0" : "") << i;
  return ss.str();
}

// 8x8 block means, shifted by a constant so the vector never has zero norm.
std::vector<float> thumbnail_embedding(const GrayImage& img) {
  constexpr int kGrid = 8;
  std::vector<float> v(kGrid * kGrid, 0.0f);
  std::vector<int> n(kGrid * kGrid, 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int cell = (y * kGrid / img.height()) * kGrid + (x * kGrid / img.width());
      v[cell] += static_cast<float>(img.at(x, y));
      ++n[cell];
    }
  }
  for (int i = 0; i < kGrid * kGrid; ++i) v[i] = (n[i] > 0 ? v[i] / n[i] : 0.0f) + 0.01f;
  return v;
}

}  // namespace

PhantomSet make_phantom_set(const PhantomConfig& cfg) {
  if (cfg.size < 16) throw UsageError("phantom size must be >= 16");
  if (cfg.references < 1) throw UsageError("phantom set needs at least one reference");
  Rng rng(cfg.seed);
  PhantomSet set;
  for (std::size_t i = 0; i < cfg.references; ++i) set.references.push_back(random_phantom(padded("ref", i), cfg.size, rng));
  for (std::size_t i = 0; i < cfg.cases; ++i) {
    PhantomCase c = random_phantom(padded("case", i), cfg.size, rng);
    c.severity = static_cast<int>(i % static_cast<std::size_t>(cfg.max_severity + 1));
    c.prediction = degrade_mask(c.gt, c.severity, rng);
    set.cases.push_back(std::move(c));
  }
  return set;
}

void write_phantom_dataset(const PhantomSet& set, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  fs::create_directories(dir / "predictions");

  nlohmann::json manifest{{"class_count", 2}, {"cases", nlohmann::json::array()}};
  std::string embeddings;
  auto add = [&](const PhantomCase& c, const char* role, bool with_prediction) {
    save_image(c.image, dir / "images" / (c.id + ".png"));
    save_mask(c.gt, dir / "masks" / (c.id + ".png"));
    if (with_prediction) save_mask(c.prediction, dir / "predictions" / (c.id + ".png"));
    manifest["cases"].push_back({{"id", c.id}, {"role", role}});
    embeddings += nlohmann::json{{"id", c.id}, {"vec", thumbnail_embedding(c.image)}}.dump() + "\n";
  };
  for (const auto& r : set.references) add(r, "reference", false);
  for (std::size_t i = 0; i < set.cases.size(); ++i) add(set.cases[i], i % 2 == 0 ? "calibration" : "test", true);
  write_file_atomic(dir / "dataset.json", manifest.dump(2) + "\n");
  write_file_atomic(dir / "embeddings.jsonl", embeddings);
}

}  // namespace segqc
