#pragma once

// Reward/KL Pareto fronts over logged metric rows.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bond/training.hpp"

namespace bond {

struct ParetoPoint {
  std::string source;
  std::int64_t step = 0;
  double kl_to_ref = 0.0;
  double reward_mean = 0.0;
  bool non_dominated = false;
};

/// A point is dominated when another point has strictly higher reward at
/// KL no larger than its own. Sets `non_dominated` on every point.
void mark_front(std::span<ParetoPoint> points);

std::vector<ParetoPoint> points_from_rows(const std::string& source, std::span<const MetricsRow> rows);

/// Reads `step`, `kl_to_ref` and `reward_mean` from each CSV; the source
/// of a point is its file path as given.
std::vector<ParetoPoint> load_pareto_points(std::span<const std::filesystem::path> csvs);

/// Header `source,step,kl_to_ref,reward_mean,non_dominated` (flag 0/1).
void write_pareto_csv(std::ostream& out, std::span<const ParetoPoint> points);
void save_pareto_csv(const std::filesystem::path& path, std::span<const ParetoPoint> points);

struct FrontShare {
  double kl_low = 0.0;
  double kl_high = 0.0;
  std::size_t first = 0;   // non-dominated points of group A inside [kl_low, kl_high]
  std::size_t second = 0;  // same for group B
};

/// Pools two point groups, marks the joint front and counts each group's
/// front points inside the overlap of the groups' KL ranges.
FrontShare front_share(std::vector<ParetoPoint> a, std::vector<ParetoPoint> b);

}  // namespace bond
