#include "segqc/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "segqc/errors.hpp"

namespace segqc {

namespace {

constexpr double kRankGuard = 1e-9;

double population_sigma(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double resolve_sigma(std::span<const double> scores, std::optional<double> sigma) {
  if (sigma) {
    if (!(*sigma > 0)) throw DataError("sigma must be positive, got " + std::to_string(*sigma));
    return *sigma;
  }
  return std::max(population_sigma(scores), kMinSigma);
}

double kth_smallest(std::span<const double> values, std::size_t k) {
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

}  // namespace

std::size_t nearest_rank(double p, std::size_t m) {
  const double x = p * static_cast<double>(m);
  const auto k = static_cast<std::size_t>(std::max(0.0, std::ceil(x - kRankGuard)));
  return std::clamp<std::size_t>(k, 1, m);
}

double empirical_quantile(std::span<const double> values, double p) {
  if (values.empty()) throw DataError("empirical quantile of an empty sequence");
  if (!(p > 0 && p <= 1)) throw UsageError("quantile level must lie in (0,1], got " + std::to_string(p));
  return kth_smallest(values, nearest_rank(p, values.size()));
}

std::size_t conformal_rank(double alpha, std::size_t n) {
  const double x = (1.0 - alpha) * static_cast<double>(n + 1);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::max(0.0, std::ceil(x - kRankGuard))));
}

double conformal_threshold(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw DataError("conformal threshold needs at least one calibration score");
  if (!(alpha > 0 && alpha < 1)) throw UsageError("alpha must lie in (0,1), got " + std::to_string(alpha));
  const std::size_t k = conformal_rank(alpha, scores.size());
  if (k > scores.size()) return kInfinity;
  return kth_smallest(scores, k);
}

QuantilePair quantile_pair(std::span<const double> scores, double p_low, double p_high) {
  return {empirical_quantile(scores, p_low), empirical_quantile(scores, p_high)};
}

double nonconformity_residual(double predicted, double truth) { return std::abs(truth - predicted); }

double nonconformity_locally_weighted(double predicted, double sigma, double truth) {
  if (!(sigma > 0)) throw DataError("sigma must be positive, got " + std::to_string(sigma));
  return std::abs(truth - predicted) / sigma;
}

double nonconformity_cqr(const QuantilePair& q, double truth) { return std::max(q.low - truth, truth - q.high); }

std::string to_string(NonconformityKind kind) {
  switch (kind) {
    case NonconformityKind::CqrEmpirical: return "cqr";
    case NonconformityKind::Residual: return "residual";
    case NonconformityKind::LocallyWeighted: return "locally-weighted";
  }
  return "unknown";
}

NonconformityKind parse_nonconformity(std::string_view name) {
  if (name == "cqr" || name == "cqr-empirical") return NonconformityKind::CqrEmpirical;
  if (name == "residual") return NonconformityKind::Residual;
  if (name == "locally-weighted" || name == "lw") return NonconformityKind::LocallyWeighted;
  throw UsageError("unknown nonconformity kind '" + std::string(name) + "' (expected cqr, residual or locally-weighted)");
}

void CalibrationOptions::validate() const {
  if (!(alpha > 0 && alpha < 1)) throw UsageError("alpha must lie in (0,1)");
  if (!(p_low > 0 && p_low <= 1) || !(p_high > 0 && p_high <= 1)) {
    throw UsageError("quantile levels must lie in (0,1]");
  }
  if (p_low > p_high) throw UsageError("p_low must not exceed p_high");
}

double ConformalCalibration::clip_high() const { return metric == MetricKind::Dsc ? 1.0 : kInfinity; }

ConformalCalibration calibrate(std::span<const CalibrationRecord> records, const CalibrationOptions& opts) {
  opts.validate();
  if (records.empty()) throw DataError("calibration set is empty");

  ConformalCalibration c;
  c.alpha = opts.alpha;
  c.p_low = opts.p_low;
  c.p_high = opts.p_high;
  c.kind = opts.kind;
  c.mode = opts.mode;
  c.metric = opts.metric;
  c.n = records.size();
  c.scores.reserve(records.size());

  for (const auto& r : records) {
    if (r.scores.empty()) throw DataError("calibration record '" + r.id + "' has no RCA scores");
    switch (opts.kind) {
      case NonconformityKind::CqrEmpirical:
        c.scores.push_back(nonconformity_cqr(quantile_pair(r.scores, opts.p_low, opts.p_high), r.truth));
        break;
      case NonconformityKind::Residual:
        c.scores.push_back(nonconformity_residual(rca_point_estimate(r.scores, opts.mode, opts.metric), r.truth));
        break;
      case NonconformityKind::LocallyWeighted:
        c.scores.push_back(nonconformity_locally_weighted(rca_point_estimate(r.scores, opts.mode, opts.metric),
                                                          resolve_sigma(r.scores, r.sigma), r.truth));
        break;
    }
  }
  c.q_hat = conformal_threshold(c.scores, opts.alpha);
  return c;
}

bool PredictionInterval::contains(double y) const {
  if (degenerate) return y == lower;
  return lower <= y && y <= upper;
}

PredictionInterval make_interval(double center_low, double center_high, double q_hat, double scale, double clip_low,
                                 double clip_high) {
  PredictionInterval out;
  if (q_hat == kInfinity) {
    out.raw_lower = -kInfinity;
    out.raw_upper = kInfinity;
    out.lower = clip_low;
    out.upper = clip_high;
    return out;
  }
  out.raw_lower = center_low - q_hat * scale;
  out.raw_upper = center_high + q_hat * scale;
  if (out.raw_lower > out.raw_upper) {
    const double mid = std::clamp(0.5 * (out.raw_lower + out.raw_upper), clip_low, clip_high);
    out.lower = out.upper = mid;
    out.degenerate = true;
    return out;
  }
  out.lower = std::clamp(out.raw_lower, clip_low, clip_high);
  out.upper = std::clamp(out.raw_upper, clip_low, clip_high);
  return out;
}

PredictionInterval predict_interval(std::span<const double> scores, const ConformalCalibration& calib,
                                    std::optional<double> sigma) {
  if (scores.empty()) throw DataError("cannot predict an interval from an empty score set");
  switch (calib.kind) {
    case NonconformityKind::CqrEmpirical: {
      const auto q = quantile_pair(scores, calib.p_low, calib.p_high);
      return make_interval(q.low, q.high, calib.q_hat, 1.0, calib.clip_low(), calib.clip_high());
    }
    case NonconformityKind::Residual: {
      const double y = rca_point_estimate({scores.begin(), scores.end()}, calib.mode, calib.metric);
      return make_interval(y, y, calib.q_hat, 1.0, calib.clip_low(), calib.clip_high());
    }
    case NonconformityKind::LocallyWeighted: {
      const double y = rca_point_estimate({scores.begin(), scores.end()}, calib.mode, calib.metric);
      return make_interval(y, y, calib.q_hat, resolve_sigma(scores, sigma), calib.clip_low(), calib.clip_high());
    }
  }
  throw std::logic_error("unhandled nonconformity kind");
}

PredictionInterval predict_interval(const ScoreSet& scores, const ConformalCalibration& calib) {
  const auto v = scores.values();
  return predict_interval(v, calib);
}

double empirical_coverage(std::span<const PredictionInterval> intervals, std::span<const double> truths) {
  if (intervals.empty()) throw DataError("coverage of an empty interval list");
  if (intervals.size() != truths.size()) throw DataError("interval and truth counts differ");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) covered += intervals[i].contains(truths[i]);
  return static_cast<double>(covered) / static_cast<double>(intervals.size());
}

void to_json(nlohmann::json& j, const ConformalCalibration& c) {
  j = nlohmann::json{{"alpha", c.alpha},
                     {"p_low", c.p_low},
                     {"p_high", c.p_high},
                     {"q_hat", c.finite() ? nlohmann::json(c.q_hat) : nlohmann::json(nullptr)},
                     {"n", c.n},
                     {"kind", to_string(c.kind)},
                     {"mode", to_string(c.mode)},
                     {"metric", to_string(c.metric)},
                     {"nonconformity", c.scores},
                     {"created_from", c.created_from}};
}

void from_json(const nlohmann::json& j, ConformalCalibration& c) {
  try {
    c.alpha = j.at("alpha").get<double>();
    c.p_low = j.at("p_low").get<double>();
    c.p_high = j.at("p_high").get<double>();
    const auto& q = j.at("q_hat");
    c.q_hat = q.is_null() ? kInfinity : q.get<double>();
    c.n = j.at("n").get<std::size_t>();
    c.kind = parse_nonconformity(j.at("kind").get<std::string>());
    c.mode = parse_estimate_mode(j.value("mode", std::string("max")));
    c.metric = parse_metric(j.value("metric", std::string("dsc")));
    c.scores = j.value("nonconformity", std::vector<double>{});
    c.created_from = j.value("created_from", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed calibration: ") + e.what());
  }
  CalibrationOptions{c.alpha, c.p_low, c.p_high, c.kind, c.mode, c.metric}.validate();
  if (c.n == 0) throw DataError("malformed calibration: n must be >= 1");
}

}  // namespace segqc
