#include "bond/pareto.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <ostream>

#include "bond/error.hpp"
#include "bond/metrics_csv.hpp"
#include "bond/text.hpp"

namespace bond {

void mark_front(std::span<ParetoPoint> points) {
  // Sort by KL, then sweep keeping the best reward among points with
  // KL <= current; equal-KL groups are resolved against their own maximum.
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a].kl_to_ref < points[b].kl_to_ref;
  });
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_best = best;
    while (j < order.size() && points[order[j]].kl_to_ref == points[order[i]].kl_to_ref) {
      group_best = std::max(group_best, points[order[j]].reward_mean);
      ++j;
    }
    for (std::size_t k = i; k < j; ++k) points[order[k]].non_dominated = points[order[k]].reward_mean >= group_best;
    best = group_best;
    i = j;
  }
}

std::vector<ParetoPoint> points_from_rows(const std::string& source, std::span<const MetricsRow> rows) {
  std::vector<ParetoPoint> out;
  for (const auto& r : rows) out.push_back({source, r.step, r.kl_to_ref, r.reward_mean, false});
  return out;
}

std::vector<ParetoPoint> load_pareto_points(std::span<const std::filesystem::path> csvs) {
  if (csvs.empty()) throw InvalidArgument("pareto: need at least one CSV");
  std::vector<ParetoPoint> points;
  for (const auto& path : csvs) {
    const CsvTable t = load_csv(path);
    std::size_t step = 0, kl = 0, reward = 0;
    try {
      step = t.column("step");
      kl = t.column("kl_to_ref");
      reward = t.column("reward_mean");
    } catch (const LookupError& e) {
      throw LookupError(path.string() + ": " + e.what());
    }
    for (const auto& row : t.rows) {
      points.push_back({path.string(), text::parse_int(row[step]), text::parse_double(row[kl]),
                        text::parse_double(row[reward]), false});
    }
  }
  mark_front(points);
  return points;
}

void write_pareto_csv(std::ostream& out, std::span<const ParetoPoint> points) {
  out << "source,step,kl_to_ref,reward_mean,non_dominated\n";
  for (const auto& p : points) {
    out << p.source << ',' << p.step << ',' << text::format_double(p.kl_to_ref) << ','
        << text::format_double(p.reward_mean) << ',' << (p.non_dominated ? 1 : 0) << '\n';
  }
}

void save_pareto_csv(const std::filesystem::path& path, std::span<const ParetoPoint> points) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_pareto_csv(out, points);
  if (!out) throw IoError("write failed: " + path.string());
}

FrontShare front_share(std::vector<ParetoPoint> a, std::vector<ParetoPoint> b) {
  FrontShare share;
  if (a.empty() || b.empty()) return share;
  auto range = [](const std::vector<ParetoPoint>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end(), [](const auto& x, const auto& y) {
      return x.kl_to_ref < y.kl_to_ref;
    });
    return std::pair{lo->kl_to_ref, hi->kl_to_ref};
  };
  const auto [a_lo, a_hi] = range(a);
  const auto [b_lo, b_hi] = range(b);
  share.kl_low = std::max(a_lo, b_lo);
  share.kl_high = std::min(a_hi, b_hi);

  const std::size_t split = a.size();
  std::vector<ParetoPoint> all = std::move(a);
  all.insert(all.end(), b.begin(), b.end());
  mark_front(all);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& p = all[i];
    if (!p.non_dominated || p.kl_to_ref < share.kl_low || p.kl_to_ref > share.kl_high) continue;
    (i < split ? share.first : share.second) += 1;
  }
  return share;
}

}  // namespace bond
