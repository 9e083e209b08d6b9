#include "bond/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "bond/error.hpp"
#include "bond/text.hpp"

namespace bond {

namespace pt = boost::property_tree;

Algorithm parse_algorithm(std::string_view name) {
  if (name == "bond") return Algorithm::bond;
  if (name == "iterative_bond") return Algorithm::iterative_bond;
  if (name == "jbond") return Algorithm::jbond;
  if (name == "reinforce") return Algorithm::reinforce;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::bond: return "bond";
    case Algorithm::iterative_bond: return "iterative_bond";
    case Algorithm::jbond: return "jbond";
    case Algorithm::reinforce: return "reinforce";
  }
  return "?";
}

std::int64_t ExperimentConfig::steps() const {
  switch (algorithm) {
    case Algorithm::bond:
    case Algorithm::iterative_bond: return bond.steps;
    case Algorithm::jbond: return jbond.steps;
    case Algorithm::reinforce: return reinforce.steps;
  }
  return 0;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("not a boolean: " + v);
}

std::uint64_t parse_seed(std::string_view v) {
  const auto i = text::parse_int(v);
  if (i < 0) throw ConfigError("seeds must be >= 0");
  return static_cast<std::uint64_t>(i);
}

using Setter = std::function<void(const std::string&)>;

// Per-section key handlers; collects every failure before throwing.
class SectionBinder {
 public:
  void on(const std::string& key, Setter setter) { setters_[key] = std::move(setter); }

  void bind(const std::string& section, const pt::ptree& tree, std::vector<std::string>& errors) {
    for (const auto& [key, node] : tree) {
      auto it = setters_.find(key);
      if (it == setters_.end()) {
        errors.push_back(section + "." + key + ": unknown key");
        continue;
      }
      try {
        it->second(std::string(text::trim(node.data())));
      } catch (const std::exception& e) {
        errors.push_back(section + "." + key + ": " + e.what());
      }
    }
  }

 private:
  std::map<std::string, Setter> setters_;
};

void bind_optimizer(SectionBinder& b, OptimizerConfig& o) {
  b.on("optimizer", [&](const std::string& v) { o.kind = parse_optimizer_kind(v); });
  b.on("learning_rate", [&](const std::string& v) { o.learning_rate = text::parse_double(v); });
  b.on("adam_beta1", [&](const std::string& v) { o.beta1 = text::parse_double(v); });
  b.on("adam_beta2", [&](const std::string& v) { o.beta2 = text::parse_double(v); });
  b.on("adam_epsilon", [&](const std::string& v) { o.epsilon = text::parse_double(v); });
}

SectionBinder bond_binder(BondConfig& c, bool iterative) {
  SectionBinder b;
  bind_optimizer(b, c.optimizer);
  b.on("n", [&](const std::string& v) { c.n = static_cast<int>(text::parse_int(v)); });
  b.on("beta", [&](const std::string& v) { c.beta = text::parse_double(v); });
  b.on("k_mc", [&](const std::string& v) { c.k_mc = static_cast<int>(text::parse_int(v)); });
  b.on("batch_size", [&](const std::string& v) { c.batch_size = static_cast<int>(text::parse_int(v)); });
  b.on("steps", [&](const std::string& v) { c.steps = text::parse_int(v); });
  b.on("grad_mode", [&](const std::string& v) { c.grad_mode = parse_grad_mode(v); });
  b.on("reward_form", [&](const std::string& v) { c.reward_form = parse_reward_form(v); });
  b.on("baseline", [&](const std::string& v) { c.baseline = parse_baseline(v); });
  b.on("quantile_source", [&](const std::string& v) { c.quantile_source = parse_quantile_source(v); });
  b.on("quantile_learning_rate", [&](const std::string& v) { c.quantile_learning_rate = text::parse_double(v); });
  if (iterative) {
    b.on("anchor_update_period", [&](const std::string& v) { c.anchor_update_period = text::parse_int(v); });
  }
  return b;
}

SectionBinder jbond_binder(JBondConfig& c) {
  SectionBinder b;
  bind_optimizer(b, c.optimizer);
  b.on("beta", [&](const std::string& v) { c.beta = text::parse_double(v); });
  b.on("eta", [&](const std::string& v) { c.eta = text::parse_double(v); });
  b.on("gamma", [&](const std::string& v) { c.gamma = text::parse_double(v); });
  b.on("steps", [&](const std::string& v) { c.steps = text::parse_int(v); });
  b.on("batch_size", [&](const std::string& v) { c.batch_size = static_cast<int>(text::parse_int(v)); });
  b.on("use_baseline", [&](const std::string& v) { c.use_baseline = parse_bool(v); });
  b.on("alpha", [&](const std::string& v) { c.alpha = text::parse_double(v); });
  b.on("non_strict_reward", [&](const std::string& v) { c.non_strict_reward = parse_bool(v); });
  b.on("anchor_update_period", [&](const std::string& v) { c.anchor_update_period = text::parse_int(v); });
  return b;
}

SectionBinder reinforce_binder(ReinforceConfig& c) {
  SectionBinder b;
  bind_optimizer(b, c.optimizer);
  b.on("beta_rl", [&](const std::string& v) { c.beta_rl = text::parse_double(v); });
  b.on("samples_per_prompt", [&](const std::string& v) { c.samples_per_prompt = static_cast<int>(text::parse_int(v)); });
  b.on("steps", [&](const std::string& v) { c.steps = text::parse_int(v); });
  b.on("batch_size", [&](const std::string& v) { c.batch_size = static_cast<int>(text::parse_int(v)); });
  b.on("grad_mode", [&](const std::string& v) { c.grad_mode = parse_grad_mode(v); });
  b.on("leave_one_out", [&](const std::string& v) { c.leave_one_out = parse_bool(v); });
  return b;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }

  ExperimentConfig c;
  std::vector<std::string> errors;
  std::set<std::string> seen;
  std::string canonical;
  std::map<std::string, std::string> flat;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      errors.push_back(section + ": key outside of a section");
      continue;
    }
    for (const auto& [key, node] : body) flat[section + "." + key] = std::string(text::trim(node.data()));
  }
  for (const auto& [k, v] : flat) canonical += k + "=" + v + "\n";
  c.hash = fnv1a(canonical);

  const auto experiment = tree.get_child_optional("experiment");
  if (!experiment) throw ConfigError("missing [experiment] section");
  const auto algorithm = experiment->get_optional<std::string>("algorithm");
  if (!algorithm) throw ConfigError("experiment.algorithm is required");
  c.algorithm = parse_algorithm(text::trim(*algorithm));

  SectionBinder exp;
  exp.on("name", [&](const std::string& v) { c.name = v; });
  exp.on("algorithm", [](const std::string&) {});
  exp.on("seeds", [&](const std::string& v) {
    c.seeds.clear();
    for (auto f : text::split_fields(v)) c.seeds.push_back(parse_seed(f));
    if (c.seeds.empty()) throw ConfigError("seeds must be non-empty");
  });
  exp.on("eval_every", [&](const std::string& v) {
    c.eval_every = text::parse_int(v);
    if (c.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  });
  exp.on("output", [&](const std::string& v) { c.output = v; });
  exp.on("checkpoints", [&](const std::string& v) { c.checkpoints = parse_bool(v); });

  SectionBinder bond_b = bond_binder(c.bond, c.algorithm == Algorithm::iterative_bond);
  SectionBinder jbond_b = jbond_binder(c.jbond);
  SectionBinder reinforce_b = reinforce_binder(c.reinforce);
  if (c.algorithm == Algorithm::bond) c.bond.anchor_update_period = 1;  // unused by run_bond

  for (const auto& [section, body] : tree) {
    if (body.empty()) continue;
    if (section == "experiment") {
      exp.bind(section, body, errors);
    } else if (section == "scenario") {
      for (const auto& [key, node] : body) {
        const std::string v(text::trim(node.data()));
        try {
          if (key == "generator") c.scenario = v;
          else if (key == "seed") c.scenario_seed = parse_seed(v);
          else c.scenario_params[key] = v;
        } catch (const std::exception& e) {
          errors.push_back("scenario." + key + ": " + e.what());
        }
      }
    } else if (section == to_string(c.algorithm)) {
      switch (c.algorithm) {
        case Algorithm::bond:
        case Algorithm::iterative_bond: bond_b.bind(section, body, errors); break;
        case Algorithm::jbond: jbond_b.bind(section, body, errors); break;
        case Algorithm::reinforce: reinforce_b.bind(section, body, errors); break;
      }
    } else {
      errors.push_back("[" + section + "]: section does not match algorithm '" +
                       to_string(c.algorithm) + "'");
    }
  }

  if (errors.empty()) {
    try {
      switch (c.algorithm) {
        case Algorithm::bond:
        case Algorithm::iterative_bond: validate(c.bond); break;
        case Algorithm::jbond: validate(c.jbond); break;
        case Algorithm::reinforce: validate(c.reinforce); break;
      }
    } catch (const Error& e) {
      errors.push_back(to_string(c.algorithm) + std::string(": ") + e.what());
    }
    if (c.scenario == "file") {
      for (const char* key : {"rewards", "reference"}) {
        auto it = c.scenario_params.find(key);
        if (it != c.scenario_params.end() && std::filesystem::path(it->second).is_relative()) {
          it->second = (base_dir / it->second).string();
        }
      }
    }
    try {
      generate_scenario(c.scenario, c.scenario_params, c.scenario_seed_for(c.seeds.front()));
    } catch (const Error& e) {
      errors.push_back(std::string("scenario: ") + e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  if (c.output.is_relative()) c.output = base_dir / c.output;
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  return parse_experiment_config(in, path.parent_path());
}

}  // namespace bond
