#pragma once

// Prompts, enumerable outcome spaces and the strict reward order.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace bond {

inline constexpr std::size_t kDefaultEnumerationCap = 65536;

/// Token alphabet of `size` symbols, fixed sequence length `max_len`.
struct Vocab {
  int size = 2;
  int max_len = 1;

  /// size^max_len; throws CapExceeded if above `cap`.
  std::size_t outcome_count(std::size_t cap = kDefaultEnumerationCap) const;

  friend bool operator==(const Vocab&, const Vocab&) = default;
};

void validate(const Vocab& vocab);

struct Outcome {
  std::vector<int> tokens;
  std::size_t index = 0;  // lexicographic rank, first token most significant
};

/// All outcomes in lexicographic order; `index` equals the position.
std::vector<Outcome> enumerate_outcomes(const Vocab& vocab,
                                        std::size_t cap = kDefaultEnumerationCap);

Outcome outcome_at(const Vocab& vocab, std::size_t index);
std::size_t outcome_index(const Vocab& vocab, std::span<const int> tokens);

/// Strict total order on outcomes: reward first, then outcome index
/// (lower index is worse on an exact reward tie).
inline bool outcome_less(std::span<const double> rewards, std::size_t a, std::size_t b) {
  return rewards[a] < rewards[b] || (rewards[a] == rewards[b] && a < b);
}

/// The strict_order winner of a list of outcome indices.
std::size_t best_of(std::span<const double> rewards, std::span<const std::size_t> draws);

using PromptId = std::int64_t;

/// One prompt: its outcome space and a total reward table over it.
struct Prompt {
  PromptId id = 0;
  Vocab vocab;
  std::vector<double> rewards;  // indexed by outcome index

  std::size_t outcome_count() const { return rewards.size(); }
};

enum class Ordering { less, greater };

class PromptSet {
 public:
  PromptSet() = default;
  explicit PromptSet(std::vector<Prompt> prompts);

  std::size_t size() const { return prompts_.size(); }
  const Prompt& operator[](std::size_t position) const;
  std::span<const Prompt> prompts() const { return prompts_; }

  std::size_t position_of(PromptId id) const;
  const Prompt& by_id(PromptId id) const { return prompts_[position_of(id)]; }

  double reward(PromptId id, std::size_t outcome) const;

  /// Compares two distinct outcomes of a prompt under outcome_less.
  Ordering strict_order(PromptId id, std::size_t a, std::size_t b) const;

 private:
  std::vector<Prompt> prompts_;
};

/// Reward table as text: header `prompt_id,outcome_index,reward`, one row per
/// outcome. Every prompt gets `vocab`; all of its outcomes must be present.
PromptSet read_reward_table(std::istream& in, const Vocab& vocab);
PromptSet load_reward_table(const std::filesystem::path& path, const Vocab& vocab);
void write_reward_table(std::ostream& out, const PromptSet& prompts);
void save_reward_table(const std::filesystem::path& path, const PromptSet& prompts);

}  // namespace bond
