#include "bond/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "bond/error.hpp"
#include "bond/text.hpp"

namespace bond {

namespace {

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// First row of the prefixes of length `level`.
std::size_t level_offset(std::size_t width, int level) {
  return (ipow(width, level) - 1) / (width - 1);
}

void log_softmax(std::span<const double> x, std::span<double> out) {
  const double lse = log_sum_exp(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
}

}  // namespace

const char* to_string(PolicyKind kind) {
  return kind == PolicyKind::categorical ? "categorical" : "autoregressive";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "categorical") return PolicyKind::categorical;
  if (name == "autoregressive") return PolicyKind::autoregressive;
  throw InvalidArgument("unknown policy kind '" + std::string(name) + "'");
}

double log_sum_exp(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

void softmax(std::span<const double> x, std::span<double> out) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
}

ParamVector ema_blend(const ParamVector& target, const ParamVector& source, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("ema_blend: eta must lie in [0, 1]");
  if (!(target.layout == source.layout) || target.values.size() != source.values.size()) {
    throw ShapeMismatch("ema_blend: parameter layouts differ");
  }
  ParamVector out = target;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (1.0 - eta) * target.values[i] + eta * source.values[i];
  }
  return out;
}

Policy::Policy(const PromptSet& prompts, PolicyKind kind) {
  layout_.kind = kind;
  std::size_t offset = 0;
  for (const Prompt& p : prompts.prompts()) {
    ParamBlock b;
    b.prompt = p.id;
    b.offset = offset;
    if (kind == PolicyKind::categorical) {
      b.rows = 1;
      b.width = p.outcome_count();
    } else {
      b.rows = level_offset(static_cast<std::size_t>(p.vocab.size), p.vocab.max_len);
      b.width = static_cast<std::size_t>(p.vocab.size);
    }
    offset += b.size();
    layout_.blocks.push_back(b);
    vocabs_.push_back(p.vocab);
  }
  layout_.total = offset;
  params_.assign(offset, 0.0);
}

Policy Policy::uniform(const PromptSet& prompts, PolicyKind kind) { return Policy(prompts, kind); }

Policy Policy::categorical(const PromptSet& prompts, std::vector<std::vector<double>> logits) {
  Policy policy(prompts, PolicyKind::categorical);
  if (logits.size() != prompts.size()) throw ShapeMismatch("categorical: one logit vector per prompt");
  for (std::size_t p = 0; p < logits.size(); ++p) {
    const ParamBlock& b = policy.layout_.blocks[p];
    if (logits[p].size() != b.width) throw ShapeMismatch("categorical: logit vector has the wrong size");
    std::copy(logits[p].begin(), logits[p].end(), policy.params_.begin() + static_cast<std::ptrdiff_t>(b.offset));
  }
  return policy;
}

Policy Policy::autoregressive_from(const PromptSet& prompts,
                                   const std::vector<std::vector<double>>& probs) {
  Policy policy(prompts, PolicyKind::autoregressive);
  if (probs.size() != prompts.size()) throw ShapeMismatch("autoregressive_from: one table per prompt");
  for (std::size_t p = 0; p < probs.size(); ++p) {
    const ParamBlock& b = policy.layout_.blocks[p];
    const std::size_t T = b.width;
    const int L = policy.vocabs_[p].max_len;
    if (probs[p].size() != ipow(T, L)) throw ShapeMismatch("autoregressive_from: table size mismatch");
    // mass[l] holds the marginal mass of every prefix of length l.
    std::vector<double> mass = probs[p];
    for (int level = L - 1; level >= 0; --level) {
      const std::size_t first = level_offset(T, level);
      std::vector<double> parent(ipow(T, level), 0.0);
      for (std::size_t k = 0; k < parent.size(); ++k) {
        for (std::size_t t = 0; t < T; ++t) {
          const double m = mass[k * T + t];
          parent[k] += m;
          policy.params_[b.offset + (first + k) * T + t] = std::log(std::max(m, 1e-300));
        }
      }
      mass = std::move(parent);
    }
  }
  return policy;
}

const Vocab& Policy::vocab(std::size_t prompt) const {
  if (prompt >= vocabs_.size()) throw LookupError("unknown prompt position " + std::to_string(prompt));
  return vocabs_[prompt];
}

std::size_t Policy::outcome_count(std::size_t prompt) const {
  const Vocab& v = vocab(prompt);
  return ipow(static_cast<std::size_t>(v.size), v.max_len);
}

const ParamBlock& Policy::checked_block(std::size_t prompt) const {
  if (prompt >= layout_.blocks.size()) throw LookupError("unknown prompt position " + std::to_string(prompt));
  return layout_.blocks[prompt];
}

std::size_t Policy::checked_outcome(std::size_t prompt, std::size_t outcome) const {
  if (outcome >= outcome_count(prompt)) throw LookupError("unknown outcome " + std::to_string(outcome));
  return outcome;
}

void Policy::set_params(const ParamVector& values) {
  if (!(values.layout == layout_) || values.values.size() != params_.size()) {
    throw ShapeMismatch("set_params: parameter layouts differ");
  }
  params_ = values.values;
}

std::span<const double> Policy::block(std::size_t prompt) const {
  const ParamBlock& b = checked_block(prompt);
  return std::span<const double>(params_).subspan(b.offset, b.size());
}

std::vector<double> Policy::log_probabilities(std::size_t prompt) const {
  const ParamBlock& b = checked_block(prompt);
  const auto x = block(prompt);
  if (kind() == PolicyKind::categorical) {
    std::vector<double> out(b.width);
    log_softmax(x, out);
    return out;
  }
  const std::size_t T = b.width;
  std::vector<double> cur{0.0};
  std::vector<double> row(T);
  std::size_t first = 0;
  for (int level = 0; level < vocabs_[prompt].max_len; ++level) {
    std::vector<double> next(cur.size() * T);
    for (std::size_t k = 0; k < cur.size(); ++k) {
      log_softmax(x.subspan((first + k) * T, T), row);
      for (std::size_t t = 0; t < T; ++t) next[k * T + t] = cur[k] + row[t];
    }
    first += cur.size();
    cur = std::move(next);
  }
  return cur;
}

std::vector<double> Policy::probabilities(std::size_t prompt) const {
  const ParamBlock& b = checked_block(prompt);
  if (kind() == PolicyKind::categorical) {
    std::vector<double> out(b.width);
    softmax(block(prompt), out);
    return out;
  }
  auto out = log_probabilities(prompt);
  for (double& v : out) v = std::exp(v);
  return out;
}

double Policy::log_prob(std::size_t prompt, std::size_t outcome) const {
  const ParamBlock& b = checked_block(prompt);
  checked_outcome(prompt, outcome);
  const auto x = block(prompt);
  if (kind() == PolicyKind::categorical) return x[outcome] - log_sum_exp(x);
  const std::size_t T = b.width;
  const int L = vocabs_[prompt].max_len;
  double lp = 0.0;
  std::size_t rank = 0;
  for (int level = 0; level < L; ++level) {
    const std::size_t token = (outcome / ipow(T, L - level - 1)) % T;
    const auto row = x.subspan((level_offset(T, level) + rank) * T, T);
    lp += row[token] - log_sum_exp(row);
    rank = rank * T + token;
  }
  return lp;
}

std::size_t Policy::sample_one(std::size_t prompt, Rng& rng) const {
  const ParamBlock& b = checked_block(prompt);
  const auto x = block(prompt);
  std::vector<double> p(b.width);
  if (kind() == PolicyKind::categorical) {
    softmax(x, p);
    return rng.categorical(p);
  }
  const std::size_t T = b.width;
  std::size_t rank = 0;
  for (int level = 0; level < vocabs_[prompt].max_len; ++level) {
    softmax(x.subspan((level_offset(T, level) + rank) * T, T), p);
    rank = rank * T + rng.categorical(p);
  }
  return rank;
}

std::vector<std::size_t> Policy::sample(std::size_t prompt, Rng& rng, std::size_t count) const {
  if (count < 1) throw InvalidArgument("sample: count must be >= 1");
  const ParamBlock& b = checked_block(prompt);
  std::vector<std::size_t> out;
  out.reserve(count);
  if (kind() == PolicyKind::categorical) {
    // One softmax for the whole batch.
    std::vector<double> p(b.width);
    softmax(block(prompt), p);
    for (std::size_t i = 0; i < count; ++i) out.push_back(rng.categorical(p));
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_one(prompt, rng));
  return out;
}

std::vector<Outcome> Policy::sample(std::size_t prompt, std::uint64_t seed, std::size_t count) const {
  Rng rng(seed);
  std::vector<Outcome> out;
  for (std::size_t y : sample(prompt, rng, count)) out.push_back(outcome_at(vocab(prompt), y));
  return out;
}

ParamVector Policy::score(std::size_t prompt, std::size_t outcome) const {
  ParamVector g{layout_, std::vector<double>(params_.size(), 0.0)};
  add_score(prompt, outcome, 1.0, g.values);
  return g;
}

void Policy::add_score(std::size_t prompt, std::size_t outcome, double weight,
                       std::span<double> grad) const {
  const ParamBlock& b = checked_block(prompt);
  checked_outcome(prompt, outcome);
  if (grad.size() != params_.size()) throw ShapeMismatch("add_score: gradient has the wrong size");
  const auto x = block(prompt);
  auto g = grad.subspan(b.offset, b.size());
  std::vector<double> p(b.width);
  if (kind() == PolicyKind::categorical) {
    softmax(x, p);
    for (std::size_t i = 0; i < b.width; ++i) g[i] -= weight * p[i];
    g[outcome] += weight;
    return;
  }
  const std::size_t T = b.width;
  const int L = vocabs_[prompt].max_len;
  std::size_t rank = 0;
  for (int level = 0; level < L; ++level) {
    const std::size_t token = (outcome / ipow(T, L - level - 1)) % T;
    const std::size_t row = level_offset(T, level) + rank;
    softmax(x.subspan(row * T, T), p);
    for (std::size_t t = 0; t < T; ++t) g[row * T + t] -= weight * p[t];
    g[row * T + token] += weight;
    rank = rank * T + token;
  }
}

void Policy::add_weighted_scores(std::size_t prompt, std::span<const double> weights,
                                 std::span<double> grad) const {
  const ParamBlock& b = checked_block(prompt);
  if (weights.size() != outcome_count(prompt)) throw ShapeMismatch("add_weighted_scores: weight size");
  if (grad.size() != params_.size()) throw ShapeMismatch("add_weighted_scores: gradient size");
  const auto x = block(prompt);
  auto g = grad.subspan(b.offset, b.size());
  std::vector<double> p(b.width);
  if (kind() == PolicyKind::categorical) {
    softmax(x, p);
    double total = 0.0;
    for (double w : weights) total += w;
    for (std::size_t i = 0; i < b.width; ++i) g[i] += weights[i] - total * p[i];
    return;
  }
  // Aggregate weights bottom-up: `child` holds the weight routed through each
  // prefix of length level + 1.
  const std::size_t T = b.width;
  std::vector<double> child(weights.begin(), weights.end());
  for (int level = vocabs_[prompt].max_len - 1; level >= 0; --level) {
    const std::size_t first = level_offset(T, level);
    std::vector<double> parent(child.size() / T, 0.0);
    for (std::size_t k = 0; k < parent.size(); ++k) {
      const std::size_t row = first + k;
      softmax(x.subspan(row * T, T), p);
      for (std::size_t t = 0; t < T; ++t) parent[k] += child[k * T + t];
      for (std::size_t t = 0; t < T; ++t) g[row * T + t] += child[k * T + t] - parent[k] * p[t];
    }
    child = std::move(parent);
  }
}

void write_policy(std::ostream& out, const Policy& policy) {
  out << "# kind=" << to_string(policy.kind()) << '\n';
  out << "prompt_id,prefix_or_flat_index,token_index,logit\n";
  const auto params = policy.params();
  for (const ParamBlock& b : policy.layout().blocks) {
    for (std::size_t r = 0; r < b.rows; ++r) {
      for (std::size_t c = 0; c < b.width; ++c) {
        const double v = params[b.offset + r * b.width + c];
        if (policy.kind() == PolicyKind::categorical) {
          out << b.prompt << ',' << c << ",-1," << text::format_double(v) << '\n';
        } else {
          out << b.prompt << ',' << r << ',' << c << ',' << text::format_double(v) << '\n';
        }
      }
    }
  }
}

Policy read_policy(std::istream& in, const PromptSet& prompts) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# kind=", 0) != 0) {
    throw IoError("policy checkpoint: missing '# kind=' line");
  }
  Policy policy = Policy::uniform(prompts, parse_policy_kind(text::trim(line.substr(7))));
  if (!std::getline(in, line) || text::trim(line) != "prompt_id,prefix_or_flat_index,token_index,logit") {
    throw IoError("policy checkpoint: bad header");
  }
  ParamVector pv = policy.param_vector();
  std::vector<bool> seen(pv.values.size(), false);
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split_fields(line);
    if (f.size() != 4) throw IoError("policy checkpoint: expected 4 fields");
    const std::size_t pos = prompts.position_of(text::parse_int(f[0]));
    const ParamBlock& b = pv.layout.blocks[pos];
    const auto row_or_flat = text::parse_int(f[1]);
    const auto token = text::parse_int(f[2]);
    std::size_t r = 0;
    std::size_t c = 0;
    if (policy.kind() == PolicyKind::categorical) {
      if (token != -1) throw IoError("policy checkpoint: categorical rows need token_index -1");
      c = static_cast<std::size_t>(row_or_flat);
    } else {
      r = static_cast<std::size_t>(row_or_flat);
      c = static_cast<std::size_t>(token);
    }
    if (row_or_flat < 0 || r >= b.rows || c >= b.width || (token < 0 && policy.kind() != PolicyKind::categorical)) {
      throw LookupError("policy checkpoint: index out of range");
    }
    const std::size_t i = b.offset + r * b.width + c;
    pv.values[i] = text::parse_double(f[3]);
    seen[i] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw IoError("policy checkpoint: missing logits");
  }
  policy.set_params(pv);
  return policy;
}

void save_policy(const std::filesystem::path& path, const Policy& policy) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_policy(out, policy);
  if (!out) throw IoError("write failed: " + path.string());
}

Policy load_policy(const std::filesystem::path& path, const PromptSet& prompts) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_policy(in, prompts);
}

}  // namespace bond
