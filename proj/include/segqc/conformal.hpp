#pragma once

#include <cstddef>
#include <limits>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segqc/rca.hpp"

namespace segqc {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Rank ceil(p * m) clamped to [1, m], with a 1e-9 guard so that products
/// that are integers up to rounding error (0.95 * 20) do not round up.
std::size_t nearest_rank(double p, std::size_t m);

/// The ceil(p*m)-th smallest value (higher nearest-rank rule).
double empirical_quantile(std::span<const double> values, double p);

/// ceil((1 - alpha) * (n + 1)); may exceed n.
std::size_t conformal_rank(double alpha, std::size_t n);

/// The conformal_rank-th smallest score, or +infinity when that rank exceeds n.
double conformal_threshold(std::span<const double> scores, double alpha);

struct QuantilePair {
  double low = 0;
  double high = 0;
};

QuantilePair quantile_pair(std::span<const double> scores, double p_low, double p_high);

double nonconformity_residual(double predicted, double truth);
double nonconformity_locally_weighted(double predicted, double sigma, double truth);
/// max(low - truth, truth - high); negative when truth lies strictly inside.
double nonconformity_cqr(const QuantilePair& q, double truth);

enum class NonconformityKind { CqrEmpirical, Residual, LocallyWeighted };

std::string to_string(NonconformityKind kind);
NonconformityKind parse_nonconformity(std::string_view name);

/// One calibration case: its RCA scores and its true quality. `sigma` is the
/// residual scale for the locally weighted kind; when absent the population
/// standard deviation of `scores` (floored at kMinSigma) is used.
struct CalibrationRecord {
  std::string id;
  std::vector<double> scores;
  double truth = 0;
  std::optional<double> sigma;
};

inline constexpr double kMinSigma = 1e-3;

struct CalibrationOptions {
  double alpha = 0.1;
  double p_low = 0.4;
  double p_high = 0.95;
  NonconformityKind kind = NonconformityKind::CqrEmpirical;
  EstimateMode mode = EstimateMode::Max;  // point prediction for residual kinds
  MetricKind metric = MetricKind::Dsc;

  void validate() const;
};

struct ConformalCalibration {
  double alpha = 0.1;
  double p_low = 0.4;
  double p_high = 0.95;
  double q_hat = kInfinity;
  std::size_t n = 0;
  NonconformityKind kind = NonconformityKind::CqrEmpirical;
  EstimateMode mode = EstimateMode::Max;
  MetricKind metric = MetricKind::Dsc;
  /// Nonconformity score of every calibration record, in record order.
  std::vector<double> scores;
  std::string created_from;

  bool finite() const { return q_hat < kInfinity; }
  /// Interval clipping range: [0,1] for DSC, [0, inf) for distances.
  double clip_low() const { return 0.0; }
  double clip_high() const;
};

ConformalCalibration calibrate(std::span<const CalibrationRecord> records, const CalibrationOptions& opts);

struct PredictionInterval {
  double lower = 0;
  double upper = 1;
  double raw_lower = -kInfinity;  // before clipping and collapse
  double raw_upper = kInfinity;
  bool degenerate = false;        // the unclipped interval was empty and collapsed to its midpoint

  double width() const { return upper - lower; }
  bool contains(double y) const;
};

/// Builds [center_low - q_hat * scale, center_high + q_hat * scale], collapses
/// an empty result to its midpoint (flagged), then clips to [clip_low, clip_high].
PredictionInterval make_interval(double center_low, double center_high, double q_hat, double scale, double clip_low,
                                 double clip_high);

PredictionInterval predict_interval(std::span<const double> scores, const ConformalCalibration& calib,
                                    std::optional<double> sigma = std::nullopt);
PredictionInterval predict_interval(const ScoreSet& scores, const ConformalCalibration& calib);

/// Fraction of truths inside their interval, bounds inclusive. Degenerate
/// intervals cover only an exactly equal truth.
double empirical_coverage(std::span<const PredictionInterval> intervals, std::span<const double> truths);

void to_json(nlohmann::json& j, const ConformalCalibration& c);
void from_json(const nlohmann::json& j, ConformalCalibration& c);

}  // namespace segqc
