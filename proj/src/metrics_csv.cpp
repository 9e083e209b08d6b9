#include "bond/metrics_csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "bond/error.hpp"
#include "bond/text.hpp"

namespace bond {

namespace {

void put(std::ostream& out, const std::optional<double>& v) {
  out << ',';
  if (v) out << text::format_double(*v);
}

std::optional<double> optional_cell(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  return text::parse_double(cell);
}

}  // namespace

void write_metrics_header(std::ostream& out) { out << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  out << row.step << ',' << text::format_double(row.reward_mean) << ','
      << text::format_double(row.log_quantile_mean) << ',' << text::format_double(row.kl_to_ref);
  put(out, row.fwd_kl_to_bon);
  put(out, row.bwd_kl_to_bon);
  put(out, row.jeffreys);
  put(out, row.kl_to_anchor);
  out << '\n';
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw LookupError("missing column '" + std::string(name) + "'");
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV");
  for (auto f : text::split_fields(line)) t.columns.emplace_back(f);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    std::vector<std::string> row;
    for (auto f : text::split_fields(line)) row.emplace_back(f);
    if (row.size() != t.columns.size()) {
      throw IoError("CSV line " + std::to_string(line_no) + ": expected " +
                    std::to_string(t.columns.size()) + " fields");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return read_csv(in);
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  std::string header;
  for (std::size_t i = 0; i < t.columns.size(); ++i) header += (i ? "," : "") + t.columns[i];
  if (header != kMetricsHeader) throw IoError("unexpected metrics header: " + header);
  std::vector<MetricsRow> rows;
  for (const auto& r : t.rows) {
    MetricsRow m;
    m.step = text::parse_int(r[0]);
    m.reward_mean = text::parse_double(r[1]);
    m.log_quantile_mean = text::parse_double(r[2]);
    m.kl_to_ref = text::parse_double(r[3]);
    m.fwd_kl_to_bon = optional_cell(r[4]);
    m.bwd_kl_to_bon = optional_cell(r[5]);
    m.jeffreys = optional_cell(r[6]);
    m.kl_to_anchor = optional_cell(r[7]);
    rows.push_back(m);
  }
  return rows;
}

std::vector<MetricsRow> load_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return read_metrics_csv(in);
}

}  // namespace bond
