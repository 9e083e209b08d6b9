#include "bond/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bond/error.hpp"
#include "bond/rng.hpp"
#include "bond/text.hpp"

namespace bond {

namespace {

const std::set<std::string> kCommon{"prompts", "vocab_size", "max_len", "reference_scale",
                                    "policy_kind"};

class ParamReader {
 public:
  ParamReader(const std::string& name, const ScenarioParams& params,
              std::set<std::string> allowed)
      : name_(name), params_(params) {
    allowed.insert(kCommon.begin(), kCommon.end());
    std::string unknown;
    for (const auto& [key, value] : params) {
      if (!allowed.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    }
    if (!unknown.empty()) throw ConfigError("scenario '" + name + "': unknown parameters: " + unknown);
  }

  double real(const std::string& key, double fallback) const {
    auto it = params_.find(key);
    if (it == params_.end()) return fallback;
    try {
      return text::parse_double(it->second);
    } catch (const Error&) {
      throw ConfigError("scenario '" + name_ + "': " + key + " is not a number: " + it->second);
    }
  }

  int integer(const std::string& key, int fallback) const {
    auto it = params_.find(key);
    if (it == params_.end()) return fallback;
    try {
      return static_cast<int>(text::parse_int(it->second));
    } catch (const Error&) {
      throw ConfigError("scenario '" + name_ + "': " + key + " is not an integer: " + it->second);
    }
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

 private:
  std::string name_;
  const ScenarioParams& params_;
};

struct Shape {
  int prompts = 4;
  Vocab vocab;
  double reference_scale = 1.0;
  PolicyKind kind = PolicyKind::categorical;
};

Shape read_shape(const std::string& name, const ParamReader& reader) {
  Shape s;
  s.prompts = reader.integer("prompts", 4);
  s.vocab = Vocab{reader.integer("vocab_size", 4), reader.integer("max_len", 1)};
  s.reference_scale = reader.real("reference_scale", 1.0);
  try {
    s.kind = parse_policy_kind(reader.str("policy_kind", "categorical"));
  } catch (const Error& e) {
    throw ConfigError("scenario '" + name + "': " + e.what());
  }
  if (s.prompts < 1) throw ConfigError("scenario '" + name + "': prompts must be >= 1");
  if (s.vocab.size < 2 || s.vocab.max_len < 1) {
    throw ConfigError("scenario '" + name + "': need vocab_size >= 2 and max_len >= 1");
  }
  if (!(s.reference_scale >= 0.0)) throw ConfigError("scenario '" + name + "': reference_scale must be >= 0");
  return s;
}

std::vector<double> random_probs(Rng& rng, std::size_t m, double scale) {
  std::vector<double> logits(m), p(m);
  for (double& v : logits) v = scale * rng.normal();
  softmax(logits, p);
  return p;
}

Policy make_reference(const PromptSet& prompts, const std::vector<std::vector<double>>& probs,
                      PolicyKind kind) {
  if (kind == PolicyKind::autoregressive) return Policy::autoregressive_from(prompts, probs);
  std::vector<std::vector<double>> logits;
  for (const auto& p : probs) {
    std::vector<double> l(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) l[i] = std::log(p[i]);
    logits.push_back(std::move(l));
  }
  return Policy::categorical(prompts, std::move(logits));
}

// Fisher-Yates with the portable generator.
void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

}  // namespace

Scenario generate_scenario(const std::string& name, const ScenarioParams& params,
                           std::uint64_t seed) {
  Scenario sc;
  sc.name = name;
  sc.params = params;
  sc.seed = seed;

  if (name == "file") {
    ParamReader reader(name, params, {"rewards", "reference"});
    const Shape shape = read_shape(name, reader);
    const std::string rewards = reader.str("rewards", "");
    if (rewards.empty()) throw ConfigError("scenario 'file': rewards path is required");
    sc.prompts = load_reward_table(rewards, shape.vocab);
    const std::string reference = reader.str("reference", "");
    sc.reference = reference.empty() ? Policy::uniform(sc.prompts, shape.kind)
                                     : load_policy(reference, sc.prompts);
    return sc;
  }

  std::set<std::string> extra;
  if (name == "peaked") extra = {"peak_mass"};
  else if (name == "tied") extra = {"dup"};
  else if (name != "random") throw ConfigError("unknown scenario generator '" + name + "'");
  ParamReader reader(name, params, extra);
  const Shape shape = read_shape(name, reader);
  const std::size_t m = shape.vocab.outcome_count();
  const double peak_mass = reader.real("peak_mass", 0.05);
  const int dup = reader.integer("dup", 2);
  if (name == "peaked" && !(peak_mass > 0.0 && peak_mass < 1.0)) {
    throw ConfigError("scenario 'peaked': peak_mass must lie in (0, 1)");
  }
  if (name == "tied" && (dup < 1 || m % static_cast<std::size_t>(dup) != 0)) {
    throw ConfigError("scenario 'tied': dup must be >= 1 and divide the outcome count " + std::to_string(m));
  }

  std::vector<Prompt> prompts;
  std::vector<std::vector<double>> probs;
  for (int p = 0; p < shape.prompts; ++p) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(p)));
    std::vector<double> rewards(m);
    std::vector<double> base = random_probs(rng, m, shape.reference_scale);
    if (name == "random") {
      for (double& r : rewards) r = rng.uniform();
    } else if (name == "peaked") {
      const auto peak = std::min(m - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(m)));
      for (double& r : rewards) r = 0.5 * rng.uniform();
      rewards[peak] = 1.0;
      if (base[peak] > peak_mass) {
        const double rest = (1.0 - peak_mass) / (1.0 - base[peak]);
        for (double& b : base) b *= rest;
        base[peak] = peak_mass;
      }
    } else {
      const std::size_t groups = m / static_cast<std::size_t>(dup);
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), 0);
      shuffle(order, rng);
      for (std::size_t g = 0; g < groups; ++g) {
        const double value = (static_cast<double>(g) + rng.uniform()) / static_cast<double>(groups);
        for (int d = 0; d < dup; ++d) rewards[order[g * static_cast<std::size_t>(dup) + d]] = value;
      }
    }
    prompts.push_back(Prompt{p, shape.vocab, std::move(rewards)});
    probs.push_back(std::move(base));
  }
  sc.prompts = PromptSet(std::move(prompts));
  sc.reference = make_reference(sc.prompts, probs, shape.kind);
  return sc;
}

void save_scenario(const std::filesystem::path& dir, const Scenario& scenario) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_reward_table(dir / "rewards.csv", scenario.prompts);
  save_policy(dir / "reference.ckpt", scenario.reference);
}

}  // namespace bond
