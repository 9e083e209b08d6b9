#include "bond/outcome_space.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "bond/error.hpp"
#include "bond/text.hpp"

namespace bond {

void validate(const Vocab& vocab) {
  if (vocab.size < 2) throw InvalidArgument("vocab size must be >= 2");
  if (vocab.max_len < 1) throw InvalidArgument("vocab max_len must be >= 1");
}

std::size_t Vocab::outcome_count(std::size_t cap) const {
  validate(*this);
  std::size_t count = 1;
  for (int i = 0; i < max_len; ++i) {
    if (count > cap / static_cast<std::size_t>(size)) {
      throw CapExceeded("outcome space exceeds the enumeration cap of " + std::to_string(cap));
    }
    count *= static_cast<std::size_t>(size);
  }
  if (count > cap) {
    throw CapExceeded("outcome space of " + std::to_string(count) +
                      " exceeds the enumeration cap of " + std::to_string(cap));
  }
  return count;
}

Outcome outcome_at(const Vocab& vocab, std::size_t index) {
  const std::size_t count = vocab.outcome_count(static_cast<std::size_t>(-1));
  if (index >= count) throw LookupError("outcome index " + std::to_string(index) + " out of range");
  Outcome out;
  out.index = index;
  out.tokens.assign(static_cast<std::size_t>(vocab.max_len), 0);
  for (int pos = vocab.max_len - 1; pos >= 0; --pos) {
    out.tokens[static_cast<std::size_t>(pos)] = static_cast<int>(index % vocab.size);
    index /= vocab.size;
  }
  return out;
}

std::size_t outcome_index(const Vocab& vocab, std::span<const int> tokens) {
  if (tokens.size() != static_cast<std::size_t>(vocab.max_len)) {
    throw LookupError("token sequence has the wrong length");
  }
  std::size_t index = 0;
  for (int t : tokens) {
    if (t < 0 || t >= vocab.size) throw LookupError("token out of range");
    index = index * static_cast<std::size_t>(vocab.size) + static_cast<std::size_t>(t);
  }
  return index;
}

std::vector<Outcome> enumerate_outcomes(const Vocab& vocab, std::size_t cap) {
  const std::size_t count = vocab.outcome_count(cap);
  std::vector<Outcome> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(outcome_at(vocab, i));
  return out;
}

std::size_t best_of(std::span<const double> rewards, std::span<const std::size_t> draws) {
  if (draws.empty()) throw InvalidArgument("best_of: no draws");
  std::size_t best = draws.front();
  for (std::size_t y : draws.subspan(1)) {
    if (outcome_less(rewards, best, y)) best = y;
  }
  return best;
}

PromptSet::PromptSet(std::vector<Prompt> prompts) : prompts_(std::move(prompts)) {
  if (prompts_.empty()) throw InvalidArgument("prompt set must not be empty");
  for (std::size_t i = 0; i < prompts_.size(); ++i) {
    const Prompt& p = prompts_[i];
    if (p.rewards.size() != p.vocab.outcome_count()) {
      throw InvalidArgument("prompt " + std::to_string(p.id) +
                            ": reward table does not cover the outcome space");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (prompts_[j].id == p.id) throw InvalidArgument("duplicate prompt id " + std::to_string(p.id));
    }
  }
}

const Prompt& PromptSet::operator[](std::size_t position) const {
  if (position >= prompts_.size()) throw LookupError("prompt position out of range");
  return prompts_[position];
}

std::size_t PromptSet::position_of(PromptId id) const {
  for (std::size_t i = 0; i < prompts_.size(); ++i) {
    if (prompts_[i].id == id) return i;
  }
  throw LookupError("unknown prompt id " + std::to_string(id));
}

double PromptSet::reward(PromptId id, std::size_t outcome) const {
  const Prompt& p = by_id(id);
  if (outcome >= p.rewards.size()) throw LookupError("unknown outcome " + std::to_string(outcome));
  return p.rewards[outcome];
}

Ordering PromptSet::strict_order(PromptId id, std::size_t a, std::size_t b) const {
  const Prompt& p = by_id(id);
  if (a >= p.rewards.size() || b >= p.rewards.size()) {
    throw LookupError("unknown outcome for prompt " + std::to_string(id));
  }
  if (a == b) throw InvalidArgument("strict_order requires distinct outcomes");
  return outcome_less(p.rewards, a, b) ? Ordering::less : Ordering::greater;
}

PromptSet read_reward_table(std::istream& in, const Vocab& vocab) {
  const std::size_t count = vocab.outcome_count();
  std::string line;
  if (!std::getline(in, line)) throw IoError("reward table: missing header");
  const auto header = text::split_fields(line);
  if (header.size() != 3 || header[0] != "prompt_id" || header[1] != "outcome_index" ||
      header[2] != "reward") {
    throw IoError("reward table: header must be 'prompt_id,outcome_index,reward'");
  }
  // std::map keeps prompts in ascending id order.
  std::map<PromptId, std::vector<std::pair<std::size_t, double>>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_fields(line);
    if (f.size() != 3) throw IoError("reward table line " + std::to_string(line_no) + ": expected 3 fields");
    const auto id = text::parse_int(f[0]);
    const auto idx = text::parse_int(f[1]);
    if (idx < 0 || static_cast<std::size_t>(idx) >= count) {
      throw LookupError("reward table line " + std::to_string(line_no) + ": outcome index out of range");
    }
    rows[id].emplace_back(static_cast<std::size_t>(idx), text::parse_double(f[2]));
  }
  std::vector<Prompt> prompts;
  for (auto& [id, entries] : rows) {
    Prompt p{id, vocab, std::vector<double>(count, 0.0)};
    std::vector<bool> seen(count, false);
    for (auto [idx, r] : entries) {
      if (seen[idx]) throw IoError("reward table: duplicate row for prompt " + std::to_string(id));
      seen[idx] = true;
      p.rewards[idx] = r;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw IoError("reward table: prompt " + std::to_string(id) + " is missing outcomes");
    }
    prompts.push_back(std::move(p));
  }
  return PromptSet(std::move(prompts));
}

PromptSet load_reward_table(const std::filesystem::path& path, const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_reward_table(in, vocab);
}

void write_reward_table(std::ostream& out, const PromptSet& prompts) {
  out << "prompt_id,outcome_index,reward\n";
  for (const Prompt& p : prompts.prompts()) {
    for (std::size_t i = 0; i < p.rewards.size(); ++i) {
      out << p.id << ',' << i << ',' << text::format_double(p.rewards[i]) << '\n';
    }
  }
}

void save_reward_table(const std::filesystem::path& path, const PromptSet& prompts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_reward_table(out, prompts);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace bond
