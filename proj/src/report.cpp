#include "segqc/report.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "segqc/conformal.hpp"
#include "segqc/errors.hpp"
#include "segqc/io.hpp"

namespace segqc {

namespace {

void require_paired(std::span<const double> xs, std::span<const double> ys, std::size_t min_len) {
  if (xs.size() != ys.size()) throw DataError("sequence lengths differ");
  if (xs.size() < min_len) throw DataError("need at least " + std::to_string(min_len) + " values");
}

// Shortest decimal form that parses back to the same double.
std::string format_double(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "-inf";
  for (int p = 1; p < 17; ++p) {
    std::ostringstream t;
    t.precision(p);
    t << v;
    if (std::stod(t.str()) == v) return t.str();
  }
  std::ostringstream t;
  t.precision(17);
  t << v;
  return t.str();
}

// JSON has no infinity; unbounded interval ends are written as "inf"/"-inf".
nlohmann::json number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(v > 0 ? "inf" : "-inf");
}

nlohmann::json optional_number(const std::optional<double>& v) { return v ? number(*v) : nlohmann::json(nullptr); }

std::optional<double> read_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& v = j.at(key);
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return kInfinity;
    if (s == "-inf") return -kInfinity;
    throw DataError("unexpected string value for '" + std::string(key) + "'");
  }
  return v.get<double>();
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  require_paired(xs, ys, 2);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0)) throw DataError("correlation is undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mae(std::span<const double> xs, std::span<const double> ys) {
  require_paired(xs, ys, 1);
  double s = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += std::abs(xs[i] - ys[i]);
  return s / static_cast<double>(xs.size());
}

WidthStats width_stats(std::span<const double> widths) {
  if (widths.empty()) throw DataError("width statistics of an empty list");
  return {empirical_quantile(widths, 0.5), empirical_quantile(widths, 0.25), empirical_quantile(widths, 0.75)};
}

bool ReportPair::covered() const {
  if (!has_interval()) return false;
  if (degenerate) return truth == *lower;
  return *lower <= truth && truth <= *upper;
}

void EvaluationReport::summarize() {
  if (pairs.empty()) throw DataError("evaluation report has no pairs");
  std::vector<double> pred, truth, widths;
  std::size_t with_interval = 0, covered = 0;
  for (const auto& p : pairs) {
    pred.push_back(p.predicted);
    truth.push_back(p.truth);
    if (p.has_interval()) {
      ++with_interval;
      covered += p.covered();
      widths.push_back(p.width());
    }
  }
  summary = {};
  summary.count = pairs.size();
  summary.mae = mae(pred, truth);
  try {
    summary.correlation = pearson(pred, truth);
  } catch (const DataError&) {
    summary.correlation.reset();
  }
  if (with_interval > 0) {
    summary.coverage = static_cast<double>(covered) / static_cast<double>(with_interval);
    summary.width = width_stats(widths);
  }
}

std::string report_to_json(const EvaluationReport& report) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : report.pairs) {
    pairs.push_back({{"id", p.id},
                     {"predicted", p.predicted},
                     {"true", p.truth},
                     {"lower", optional_number(p.lower)},
                     {"upper", optional_number(p.upper)},
                     {"degenerate", p.degenerate},
                     {"covered", p.has_interval() ? nlohmann::json(p.covered()) : nlohmann::json(nullptr)},
                     {"width", p.has_interval() ? number(p.width()) : nlohmann::json(nullptr)}});
  }
  const auto& s = report.summary;
  nlohmann::json summary{{"count", s.count},
                         {"correlation", optional_number(s.correlation)},
                         {"mae", s.mae},
                         {"coverage", optional_number(s.coverage)}};
  if (s.width) {
    summary["width"] = {{"median", number(s.width->median)}, {"q25", number(s.width->q25)}, {"q75", number(s.width->q75)}};
  } else {
    summary["width"] = nullptr;
  }
  return nlohmann::json{{"pairs", pairs}, {"summary", summary}}.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
  EvaluationReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& p : j.at("pairs")) {
      ReportPair rp;
      rp.id = p.at("id").get<std::string>();
      rp.predicted = p.at("predicted").get<double>();
      rp.truth = p.at("true").get<double>();
      rp.lower = read_optional(p, "lower");
      rp.upper = read_optional(p, "upper");
      rp.degenerate = p.value("degenerate", false);
      r.pairs.push_back(std::move(rp));
    }
    const auto& s = j.at("summary");
    r.summary.count = s.at("count").get<std::size_t>();
    r.summary.correlation = read_optional(s, "correlation");
    r.summary.mae = s.at("mae").get<double>();
    r.summary.coverage = read_optional(s, "coverage");
    if (s.contains("width") && !s.at("width").is_null()) {
      const auto& w = s.at("width");
      r.summary.width = WidthStats{*read_optional(w, "median"), *read_optional(w, "q25"), *read_optional(w, "q75")};
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string report_to_csv(const EvaluationReport& report) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& p : report.pairs) {
    out += csv_field(p.id) + ',' + format_double(p.predicted) + ',' + format_double(p.truth) + ',';
    if (p.has_interval()) {
      out += format_double(*p.lower) + ',' + format_double(*p.upper) + ',' + (p.covered() ? "1" : "0") + ',' +
             format_double(p.width());
    } else {
      out += ",,,";
    }
    out += '\n';
  }
  return out;
}

void emit(const EvaluationReport& report, ReportFormat format, const std::filesystem::path& path) {
  if (report.pairs.empty()) throw DataError("refusing to emit an empty report");
  write_file_atomic(path, format == ReportFormat::Json ? report_to_json(report) : report_to_csv(report));
}

}  // namespace segqc
