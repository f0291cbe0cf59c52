#include "segqc/rca.hpp"

#include <algorithm>
#include <numeric>

#include "segqc/errors.hpp"
#include "segqc/parallel.hpp"

namespace segqc {

std::vector<double> ScoreSet::values() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.score);
  return out;
}

ScoreSet rca_scores(const RcaRequest& req) {
  if (!same_dims(req.target, req.prediction)) {
    throw DataError("target image and predicted mask dimensions differ");
  }
  const auto refs = req.references.records();
  ScoreSet out;
  out.metric = req.metric;
  out.entries.resize(refs.size());
  parallel_for(refs.size(), [&](std::size_t i) {
    const ReferenceRecord& ref = refs[i];
    try {
      LabelMask seg = req.segmenter.segment(req.target, req.prediction, ref);
      out.entries[i] = {ref.id, evaluate_metric(req.metric, seg, ref.gt_mask)};
    } catch (const std::exception& e) {
      throw DataError("reverse segmentation failed for reference '" + ref.id + "': " + e.what());
    }
  });
  return out;
}

std::string to_string(EstimateMode mode) { return mode == EstimateMode::Max ? "max" : "mean"; }

EstimateMode parse_estimate_mode(std::string_view name) {
  if (name == "max") return EstimateMode::Max;
  if (name == "mean") return EstimateMode::Mean;
  throw UsageError("unknown estimate mode '" + std::string(name) + "' (expected max or mean)");
}

double rca_point_estimate(const std::vector<double>& scores, EstimateMode mode, MetricKind metric) {
  if (scores.empty()) throw DataError("point estimate of an empty score set");
  if (mode == EstimateMode::Mean) {
    return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  }
  return higher_is_better(metric) ? *std::max_element(scores.begin(), scores.end())
                                  : *std::min_element(scores.begin(), scores.end());
}

double rca_point_estimate(const ScoreSet& scores, EstimateMode mode) {
  return rca_point_estimate(scores.values(), mode, scores.metric);
}

}  // namespace segqc
