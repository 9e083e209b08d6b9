#pragma once

// Softmax policies over enumerable outcome spaces.
//
// A policy holds one logit table per prompt. A categorical policy has a
// single row with one logit per outcome. An autoregressive policy has one
// row of `vocab.size` logits per prefix of length < max_len; prefixes of
// length l occupy rows [(T^l - 1)/(T - 1), (T^(l+1) - 1)/(T - 1)) in
// lexicographic order.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "bond/outcome_space.hpp"
#include "bond/rng.hpp"

namespace bond {

enum class PolicyKind { categorical, autoregressive };

const char* to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);

struct ParamBlock {
  PromptId prompt = 0;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t width = 0;

  std::size_t size() const { return rows * width; }
  friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

/// Stable index map from (prompt, row, column) to a flat parameter index.
struct ParamLayout {
  PolicyKind kind = PolicyKind::categorical;
  std::vector<ParamBlock> blocks;
  std::size_t total = 0;

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

/// Flat view of all logits of a policy together with its index map.
struct ParamVector {
  ParamLayout layout;
  std::vector<double> values;
};

/// (1 - eta) * target + eta * source, element-wise. Throws ShapeMismatch if
/// the index maps differ and InvalidArgument if eta is outside [0, 1].
ParamVector ema_blend(const ParamVector& target, const ParamVector& source, double eta);

class Policy {
 public:
  /// Empty policy with no prompts; only useful as a placeholder.
  Policy() = default;

  /// All logits zero.
  static Policy uniform(const PromptSet& prompts, PolicyKind kind);

  /// Flat categorical policy from one logit vector per prompt.
  static Policy categorical(const PromptSet& prompts, std::vector<std::vector<double>> logits);

  /// Autoregressive policy whose sequence law equals `probs[p]` for every
  /// prompt: each row holds the log of the next-token marginal mass.
  static Policy autoregressive_from(const PromptSet& prompts,
                                    const std::vector<std::vector<double>>& probs);

  PolicyKind kind() const { return layout_.kind; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t prompt_count() const { return vocabs_.size(); }
  const Vocab& vocab(std::size_t prompt) const;
  std::size_t outcome_count(std::size_t prompt) const;

  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }
  ParamVector param_vector() const { return {layout_, params_}; }
  void set_params(const ParamVector& values);

  /// Logits of one prompt, row-major.
  std::span<const double> block(std::size_t prompt) const;

  /// Probabilities over all outcomes of a prompt, indexed by outcome index.
  std::vector<double> probabilities(std::size_t prompt) const;
  std::vector<double> log_probabilities(std::size_t prompt) const;
  double log_prob(std::size_t prompt, std::size_t outcome) const;

  std::size_t sample_one(std::size_t prompt, Rng& rng) const;
  std::vector<std::size_t> sample(std::size_t prompt, Rng& rng, std::size_t count) const;
  std::vector<Outcome> sample(std::size_t prompt, std::uint64_t seed, std::size_t count) const;

  /// Gradient of log pi(outcome) with respect to every logit of the policy.
  ParamVector score(std::size_t prompt, std::size_t outcome) const;

  /// grad += weight * score(prompt, outcome), touching only the prompt's block.
  void add_score(std::size_t prompt, std::size_t outcome, double weight,
                 std::span<double> grad) const;

  /// grad += sum_y weights[y] * score(prompt, y).
  void add_weighted_scores(std::size_t prompt, std::span<const double> weights,
                           std::span<double> grad) const;

 private:
  Policy(const PromptSet& prompts, PolicyKind kind);
  const ParamBlock& checked_block(std::size_t prompt) const;
  std::size_t checked_outcome(std::size_t prompt, std::size_t outcome) const;

  ParamLayout layout_;
  std::vector<Vocab> vocabs_;
  std::vector<double> params_;
};

/// Checkpoint text: a `# kind=<categorical|autoregressive>` line, the header
/// `prompt_id,prefix_or_flat_index,token_index,logit`, then one row per
/// logit. Categorical rows carry the outcome index and token_index -1.
void write_policy(std::ostream& out, const Policy& policy);
Policy read_policy(std::istream& in, const PromptSet& prompts);
void save_policy(const std::filesystem::path& path, const Policy& policy);
Policy load_policy(const std::filesystem::path& path, const PromptSet& prompts);

/// Numerically stable log(sum(exp(x))).
double log_sum_exp(std::span<const double> x);

/// softmax(x) into `out` (same size).
void softmax(std::span<const double> x, std::span<double> out);

}  // namespace bond
