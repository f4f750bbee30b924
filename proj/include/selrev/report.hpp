#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "selrev/corpus.hpp"
#include "selrev/errors.hpp"

namespace selrev {

/// One line of the evaluation report.
struct ReportRow {
  double relevance_threshold = 0.0;
  std::string scorer;
  std::string method;
  double n_au = 0.0;
  double n_a = 0.0;
  double n_u = 0.0;
};

namespace detail {

inline std::string format_double(double value, const char* spec) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), spec, value);
  return buffer;
}

}  // namespace detail

/// Comma-separated report with a fixed header and column order. Metric cells
/// are rounded to 3 decimals unless full precision is requested; either way
/// the bytes are a pure function of the rows.
inline std::string format_report(const std::vector<ReportRow>& rows,
                                 bool full_precision = false) {
  const char* metric_spec = full_precision ? "%.17g" : "%.3f";
  std::string out = "relevance_threshold,scorer,method,n_au,n_a,n_u\n";
  for (const auto& row : rows) {
    out += detail::format_double(row.relevance_threshold, "%.2f");
    out += ',';
    out += row.scorer;
    out += ',';
    out += row.method;
    out += ',';
    out += detail::format_double(row.n_au, metric_spec);
    out += ',';
    out += detail::format_double(row.n_a, metric_spec);
    out += ',';
    out += detail::format_double(row.n_u, metric_spec);
    out += '\n';
  }
  return out;
}

inline std::string format_stats(const std::vector<StatsRow>& rows) {
  std::string out =
      "relevance_threshold,relevant_reviews,answerable_questions,"
      "answerable_pct\n";
  for (const auto& row : rows) {
    out += detail::format_double(row.tau, "%.2f");
    out += ',';
    out += std::to_string(row.relevant_reviews);
    out += ',';
    out += std::to_string(row.answerable_questions);
    out += ',';
    out += std::to_string(
        static_cast<long>(std::lround(row.answerable_fraction * 100.0)));
    out += '\n';
  }
  return out;
}

}  // namespace selrev
