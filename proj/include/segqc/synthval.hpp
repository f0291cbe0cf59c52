#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segqc/conformal.hpp"
#include "segqc/core.hpp"
#include "segqc/rng.hpp"

namespace segqc {

/// Beta(2,2) variate as the median of three independent uniforms.
double sample_beta22(Rng& rng);

/// m scores clip(y_true + N(0, sigma), 0, 1).
std::vector<double> synth_score_set(double y_true, std::size_t m, double sigma, Rng& rng);

struct SyntheticConfig {
  std::size_t n_cal = 200;
  std::size_t n_test = 2000;
  std::size_t ref_size = 32;
  double noise_sigma = 0.1;
  double alpha = 0.1;
  double p_low = 0.4;
  double p_high = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrialResult {
  std::uint64_t seed = 0;
  double coverage = 0;
  double mean_width = 0;
  double q_hat = 0;
};

/// Draws n_cal + n_test true scores, builds a noisy score set for each,
/// calibrates on the first n_cal and reports coverage on the rest.
TrialResult run_synthetic_trial(const SyntheticConfig& cfg);

/// `severity` rounds of 1px erosion, dilation or translation (background
/// fill). Each call draws one size direction (erode or dilate) and one of the
/// four shift directions; each round then applies the size step with
/// probability 2/3 and the shift otherwise.
LabelMask degrade_mask(const LabelMask& mask, int severity, Rng& rng);

LabelMask erode(const LabelMask& mask);
LabelMask dilate(const LabelMask& mask);
LabelMask translate(const LabelMask& mask, int dx, int dy);

/// Binary disk (or ellipse when rx != ry) centered at (cx, cy).
LabelMask ellipse_mask(int width, int height, double cx, double cy, double rx, double ry);

/// Textured grayscale rendering of a binary mask: smooth bright foreground on
/// a darker background with seeded low-amplitude noise.
GrayImage render_phantom(const LabelMask& mask, Rng& rng);

struct PhantomCase {
  std::string id;
  GrayImage image;
  LabelMask gt;
  LabelMask prediction;  // degraded gt; equals gt for references
  int severity = 0;
};

struct PhantomConfig {
  int size = 64;
  std::size_t references = 8;
  std::size_t cases = 60;       // calibration + test cases
  int max_severity = 8;
  std::uint64_t seed = 1;
};

/// Disks with random center, radii and intensity texture. References have no
/// degradation; cases cycle severities 0..max_severity.
struct PhantomSet {
  std::vector<PhantomCase> references;
  std::vector<PhantomCase> cases;
};

PhantomSet make_phantom_set(const PhantomConfig& cfg);

/// Writes a dataset directory (images/, masks/, predictions/, dataset.json,
/// embeddings.jsonl). Cases alternate calibration/test roles.
void write_phantom_dataset(const PhantomSet& set, const std::filesystem::path& dir);

}  // namespace segqc
