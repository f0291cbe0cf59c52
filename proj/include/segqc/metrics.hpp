#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "segqc/core.hpp"

namespace segqc {

enum class MetricKind { Dsc, Hausdorff, Assd };

std::string to_string(MetricKind kind);
MetricKind parse_metric(std::string_view name);

/// True when larger values mean better agreement (DSC); false for distances.
bool higher_is_better(MetricKind kind);

/// 2*TP / (2*TP + FP + FN) on binary masks. Both empty -> 1, exactly one empty -> 0.
double dsc_binary(const LabelMask& pred, const LabelMask& gt);

/// Unweighted mean of the per-class DSC over foreground classes 1..class_count-1.
double dsc_multiclass(const LabelMask& pred, const LabelMask& gt);

/// Foreground pixels (label != 0) with a 4-neighbor outside the foreground.
/// Pixels on the image border count as boundary.
std::vector<int> boundary_indices(const LabelMask& binary_mask);

/// Exact squared Euclidean distance (in pixels^2) from every pixel to the
/// nearest pixel of `seeds`. Returns +inf everywhere when `seeds` is empty.
std::vector<double> squared_distance_transform(int width, int height, const std::vector<int>& seeds);

/// Symmetric Hausdorff distance between the boundaries of two binary masks.
/// Throws UndefinedMetricError if either foreground is empty.
double hausdorff(const LabelMask& pred, const LabelMask& gt);

/// Average symmetric surface distance between the boundaries of two binary masks.
double assd(const LabelMask& pred, const LabelMask& gt);

/// Evaluates `kind` on possibly multi-class masks. DSC uses dsc_multiclass;
/// distance metrics are macro-averaged over foreground classes.
double evaluate_metric(MetricKind kind, const LabelMask& pred, const LabelMask& gt);

}  // namespace segqc
