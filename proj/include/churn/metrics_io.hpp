#pragma once

#include <string>
#include <vector>

#include "churn/churn_engine.hpp"

namespace churn {

/// Fixed metrics header.  Wall-clock time is kept out of this file so that
/// reruns with the same seed are byte-identical; see write_timing.
inline constexpr const char* kMetricsHeader =
    "step,iterations,train_loss,test_loss,train_accuracy,test_accuracy,eliminate,"
    "candidates,removed,removed_scores,inserted,termination";

/// One CSV row per record; descriptor lists joined with ';', floats with 9
/// significant digits, NaN written as an empty field.
void export_metrics(const RunMetrics& metrics, const FeaturePool& pool, const std::string& path);

/// step,elapsed_ms
void write_timing(const RunMetrics& metrics, const std::string& path);

/// Parsed metrics row; descriptor lists stay in string form.
struct MetricsRow {
  std::size_t step = 0;
  std::size_t iterations = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t eliminate = 0;
  std::size_t candidates = 0;
  std::vector<std::string> removed;
  std::vector<double> removed_scores;
  std::vector<std::string> inserted;
  Termination termination = Termination::None;
};

std::vector<MetricsRow> read_metrics(const std::string& path);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

/// Formats with 9 significant digits; NaN becomes "".
std::string format_number(double v);

}  // namespace churn
