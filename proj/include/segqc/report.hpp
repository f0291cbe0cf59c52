#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace segqc {

double pearson(std::span<const double> xs, std::span<const double> ys);
double mae(std::span<const double> xs, std::span<const double> ys);

struct WidthStats {
  double median = 0;
  double q25 = 0;
  double q75 = 0;
};

/// Nearest-rank order statistics of the widths.
WidthStats width_stats(std::span<const double> widths);

struct ReportPair {
  std::string id;
  double predicted = 0;
  double truth = 0;
  std::optional<double> lower;
  std::optional<double> upper;
  bool degenerate = false;

  bool has_interval() const { return lower.has_value() && upper.has_value(); }
  bool covered() const;
  double width() const { return has_interval() ? *upper - *lower : 0.0; }
};

struct ReportSummary {
  std::size_t count = 0;
  std::optional<double> correlation;  // absent with < 2 pairs or zero variance
  double mae = 0;
  std::optional<double> coverage;     // absent when no pair carries an interval
  std::optional<WidthStats> width;
};

struct EvaluationReport {
  std::vector<ReportPair> pairs;
  ReportSummary summary;

  /// Recomputes the summary from the pairs. Throws DataError on an empty report.
  void summarize();
};

enum class ReportFormat { Json, Csv };

/// CSV columns, fixed: id,predicted,true,lower,upper,covered,width.
inline constexpr std::string_view kCsvHeader = "id,predicted,true,lower,upper,covered,width";

std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const std::string& text);
std::string report_to_csv(const EvaluationReport& report);

/// Serializes and writes atomically. Empty reports are rejected.
void emit(const EvaluationReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace segqc
