#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "segqc/core.hpp"
#include "segqc/metrics.hpp"
#include "segqc/segmenter.hpp"

namespace segqc {

struct ScoreEntry {
  std::string reference_id;
  double score = 0;
};

/// The per-reference scores of one RCA run, in reference order.
struct ScoreSet {
  std::vector<ScoreEntry> entries;
  MetricKind metric = MetricKind::Dsc;

  std::vector<double> values() const;
  std::size_t size() const { return entries.size(); }
};

struct RcaRequest {
  const GrayImage& target;
  const LabelMask& prediction;
  const ReverseSegmenter& segmenter;
  const ReferenceDatabase& references;
  MetricKind metric = MetricKind::Dsc;
};

/// Segments every reference with the reverse segmenter built from
/// (target, prediction) and scores it against the reference ground truth.
/// References run in parallel; any failure aborts the request with the id of
/// the failing reference.
ScoreSet rca_scores(const RcaRequest& req);

/// MAX takes the best entry (largest DSC, smallest distance); MEAN averages.
enum class EstimateMode { Max, Mean };

std::string to_string(EstimateMode mode);
EstimateMode parse_estimate_mode(std::string_view name);

double rca_point_estimate(const ScoreSet& scores, EstimateMode mode = EstimateMode::Max);
double rca_point_estimate(const std::vector<double>& scores, EstimateMode mode, MetricKind metric = MetricKind::Dsc);

}  // namespace segqc
