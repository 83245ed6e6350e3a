#include "churn/metrics_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

namespace churn {

namespace {

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& render) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ';';
    out += render(items[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  for (;;) {
    auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

double parse_double(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number '" + s + "' in metrics file");
  return v;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::system_error(errno, std::generic_category(), "cannot write " + path);
  return out;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

void export_metrics(const RunMetrics& metrics, const FeaturePool& pool, const std::string& path) {
  auto out = open_for_write(path);
  auto name = [&pool](std::size_t i) { return to_string(pool[i]); };
  out << kMetricsHeader << '\n';
  for (const auto& r : metrics.records) {
    out << r.step << ',' << r.iterations << ',' << format_number(r.train_loss) << ','
        << format_number(r.test_loss) << ',' << format_number(r.train_accuracy) << ','
        << format_number(r.test_accuracy) << ',' << r.eliminate << ',' << r.candidates << ','
        << quote(join(r.removed, name)) << ','
        << join(r.removed_scores, [](double v) { return format_number(v); }) << ','
        << quote(join(r.inserted, name)) << ','
        << (r.termination == Termination::None ? std::string() : to_string(r.termination))
        << '\n';
  }
  if (!out) throw std::system_error(errno, std::generic_category(), "write failed for " + path);
}

void write_timing(const RunMetrics& metrics, const std::string& path) {
  auto out = open_for_write(path);
  out << "step,elapsed_ms\n";
  for (const auto& r : metrics.records) out << r.step << ',' << format_number(r.elapsed_ms) << '\n';
  if (!out) throw std::system_error(errno, std::generic_category(), "write failed for " + path);
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::system_error(errno, std::generic_category(), "cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw std::runtime_error(path + ": missing or unexpected metrics header");
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 12)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 12 fields, got " +
                               std::to_string(f.size()));
    MetricsRow row;
    row.step = std::stoul(f[0]);
    row.iterations = std::stoul(f[1]);
    row.train_loss = parse_double(f[2]);
    row.test_loss = parse_double(f[3]);
    row.train_accuracy = parse_double(f[4]);
    row.test_accuracy = parse_double(f[5]);
    row.eliminate = std::stoul(f[6]);
    row.candidates = std::stoul(f[7]);
    row.removed = split(f[8], ';');
    for (const auto& s : split(f[9], ';')) row.removed_scores.push_back(parse_double(s));
    row.inserted = split(f[10], ';');
    row.termination = f[11].empty() ? Termination::None : parse_termination(f[11]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace churn
