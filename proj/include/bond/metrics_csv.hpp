#pragma once

// Metric CSV files: fixed header, '.' decimal point, LF line ends, empty
// cells for fields an algorithm does not define.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bond/training.hpp"

namespace bond {

inline constexpr std::string_view kMetricsHeader =
    "step,reward_mean,log_quantile_mean,kl_to_ref,fwd_kl_to_bon,bwd_kl_to_bon,jeffreys,kl_to_anchor";

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
std::vector<MetricsRow> load_metrics_csv(const std::filesystem::path& path);

/// Generic CSV with a header line: column name -> values (empty cells kept
/// as empty strings). Throws IoError on ragged rows.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws LookupError
};

CsvTable read_csv(std::istream& in);
CsvTable load_csv(const std::filesystem::path& path);

}  // namespace bond
