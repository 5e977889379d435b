#include "reprl/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "reprl/error.hpp"
#include "reprl/linear_bandit.hpp"
#include "reprl/metrics.hpp"

namespace reprl {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& what) {
  throw Error(ErrorKind::ConfigError, key + ": " + what + " (got '" + value + "')");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) bad_value(key, raw, "expected a number");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(value)) bad_value(key, raw, "expected a finite number");
  return value;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  std::string text = trim(raw);
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  bad_value(key, raw, "expected true or false");
}

std::vector<Eigen::Index> parse_dims(const std::string& key, const std::string& raw) {
  std::vector<Eigen::Index> dims;
  const std::string text = trim(raw);
  if (text.empty() || text == "none") return dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto d = parse_number<long>(key, item);
    if (d < 1) bad_value(key, raw, "layer widths must be >= 1");
    dims.push_back(d);
  }
  return dims;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_dims(const std::vector<Eigen::Index>& dims) {
  if (dims.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) out += (i ? "," : "") + std::to_string(dims[i]);
  return out;
}

std::string format_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? "," : "") + std::to_string(seeds[i]);
  return out;
}

std::string environment_name(EnvironmentKind kind) {
  return kind == EnvironmentKind::GridWorld ? "gridworld" : "sparseline";
}

std::string rule_name(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::Greedy: return "greedy";
    case SelectionMethod::Oful: return "oful";
    case SelectionMethod::Ts: return "ts";
  }
  return "ts";
}

std::string decision_name(DecisionSetKind k) {
  switch (k) {
    case DecisionSetKind::PolicySpace: return "policy_space";
    case DecisionSetKind::LatentSpace: return "latent_space";
    case DecisionSetKind::History: return "history";
  }
  return "policy_space";
}

struct Field {
  std::string section;
  std::string key;
  bool scalar = true;  // eligible for environment overrides
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& name, const std::string& value)> set;

  std::string name() const { return section + "." + key; }
};

#define REPRL_DOUBLE(sec, k, member)                                                             \
  Field {                                                                                        \
    sec, k, true, [](const RunConfig& c) { return format_double(c.member); },                   \
        [](RunConfig& c, const std::string& n, const std::string& v) { c.member = parse_number<double>(n, v); } \
  }
#define REPRL_INT(sec, k, member, type)                                                          \
  Field {                                                                                        \
    sec, k, true, [](const RunConfig& c) { return std::to_string(c.member); },                  \
        [](RunConfig& c, const std::string& n, const std::string& v) { c.member = parse_number<type>(n, v); } \
  }
#define REPRL_BOOL(sec, k, member)                                                               \
  Field {                                                                                        \
    sec, k, true, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); },  \
        [](RunConfig& c, const std::string& n, const std::string& v) { c.member = parse_bool(n, v); } \
  }
#define REPRL_DIMS(sec, k, member)                                                               \
  Field {                                                                                        \
    sec, k, false, [](const RunConfig& c) { return format_dims(c.member); },                    \
        [](RunConfig& c, const std::string& n, const std::string& v) { c.member = parse_dims(n, v); } \
  }

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      Field{"run", "driver", true, [](const RunConfig& c) { return to_string(c.training.driver); },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              try {
                c.training.driver = parse_driver(trim(v));
              } catch (const Error&) {
                bad_value(n, v, "expected es, repes, reppg or reinforce");
              }
            }},
      REPRL_INT("run", "rounds", training.rounds, long),
      Field{"run", "environment", true, [](const RunConfig& c) { return environment_name(c.environment); },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              const std::string t = trim(v);
              if (t == "gridworld") c.environment = EnvironmentKind::GridWorld;
              else if (t == "sparseline") c.environment = EnvironmentKind::SparseLine;
              else bad_value(n, v, "expected gridworld or sparseline");
            }},
      Field{"run", "seeds", false, [](const RunConfig& c) { return format_seeds(c.seeds); },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              try {
                c.seeds = parse_seed_list(v);
              } catch (const Error&) {
                bad_value(n, v, "expected a seed list such as 1-30 or 1,2,3");
              }
            }},
      Field{"run", "out_dir", true, [](const RunConfig& c) { return c.out_dir; },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              if (trim(v).empty()) bad_value(n, v, "must not be empty");
              c.out_dir = trim(v);
            }},

      REPRL_INT("gridworld", "width", gridworld.width, int),
      REPRL_INT("gridworld", "height", gridworld.height, int),
      REPRL_INT("gridworld", "horizon", gridworld.horizon, int),
      REPRL_DOUBLE("gridworld", "r1", gridworld.r1),
      REPRL_DOUBLE("gridworld", "r2", gridworld.r2),
      REPRL_DOUBLE("gridworld", "r3", gridworld.r3),
      REPRL_DOUBLE("gridworld", "noise_std", gridworld.noise_std),
      REPRL_DOUBLE("gridworld", "a1", gridworld.a1),
      REPRL_DOUBLE("gridworld", "a2", gridworld.a2),
      REPRL_DOUBLE("gridworld", "x1", gridworld.x1),
      REPRL_DOUBLE("gridworld", "y1", gridworld.y1),
      REPRL_DOUBLE("gridworld", "x2", gridworld.x2),
      REPRL_DOUBLE("gridworld", "y2", gridworld.y2),
      REPRL_INT("gridworld", "goal_x", gridworld.goal_x, int),
      REPRL_INT("gridworld", "goal_y", gridworld.goal_y, int),
      REPRL_INT("gridworld", "start_x", gridworld.start_x, int),
      REPRL_INT("gridworld", "start_y", gridworld.start_y, int),
      REPRL_BOOL("gridworld", "terminate_at_goal", gridworld.terminate_at_goal),
      REPRL_DIMS("gridworld", "policy_hidden", gridworld.policy_hidden),

      REPRL_INT("sparseline", "horizon", sparseline.horizon, int),
      REPRL_DOUBLE("sparseline", "interval", sparseline.interval),
      REPRL_DOUBLE("sparseline", "control_cost", sparseline.control_cost),
      REPRL_DOUBLE("sparseline", "step_scale", sparseline.step_scale),
      REPRL_DOUBLE("sparseline", "milestone_reward", sparseline.milestone_reward),

      REPRL_DOUBLE("bandit", "lambda", training.learner.bandit.lambda),
      Field{"bandit", "rule", true, [](const RunConfig& c) { return rule_name(c.training.learner.bandit.rule.method); },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              const std::string t = trim(v);
              auto& m = c.training.learner.bandit.rule.method;
              if (t == "greedy") m = SelectionMethod::Greedy;
              else if (t == "oful") m = SelectionMethod::Oful;
              else if (t == "ts") m = SelectionMethod::Ts;
              else bad_value(n, v, "expected greedy, oful or ts");
            }},
      REPRL_DOUBLE("bandit", "alpha", training.learner.bandit.rule.alpha),
      REPRL_DOUBLE("bandit", "sigma", training.learner.bandit.rule.sigma),
      REPRL_BOOL("bandit", "per_candidate_draws", training.learner.bandit.per_candidate_draws),
      REPRL_INT("bandit", "history_window", training.learner.bandit.history_window, std::size_t),
      REPRL_BOOL("bandit", "sampled_features", training.learner.bandit.sampled_features),

      REPRL_INT("representation", "latent_dim", training.learner.representation.latent_dim, long),
      REPRL_DIMS("representation", "hidden", training.learner.representation.hidden),
      REPRL_BOOL("representation", "deterministic", training.learner.representation.deterministic),
      REPRL_INT("representation", "epochs", training.learner.representation.epochs, int),
      REPRL_INT("representation", "batch_size", training.learner.representation.batch_size, long),
      REPRL_DOUBLE("representation", "learning_rate", training.learner.representation.learning_rate),
      REPRL_DOUBLE("representation", "noise_var", training.learner.representation.noise_var),
      REPRL_BOOL("representation", "normalize_inputs", training.learner.representation.normalize_inputs),
      REPRL_BOOL("representation", "normalize_targets", training.learner.representation.normalize_targets),
      REPRL_INT("representation", "train_window", training.learner.train_window, std::size_t),
      REPRL_INT("representation", "inner_samples", training.learner.inner_samples, int),

      REPRL_DOUBLE("es", "nu", training.es.nu),
      REPRL_DOUBLE("es", "alpha", training.es.alpha),
      REPRL_INT("es", "eval_pairs", training.es.eval_pairs, long),
      REPRL_INT("es", "decision_size", training.es.decision_size, long),
      REPRL_DOUBLE("es", "mixing", training.es.mixing),
      REPRL_DOUBLE("es", "gamma", training.es.gamma),

      REPRL_DOUBLE("pg", "zeta", training.pg.zeta),
      REPRL_DOUBLE("pg", "learning_rate", training.pg.learning_rate),
      REPRL_INT("pg", "collect", training.pg.collect, int),
      REPRL_INT("pg", "steps", training.pg.steps, int),
      REPRL_DOUBLE("pg", "gamma", training.pg.gamma),
      REPRL_DIMS("pg", "baseline_hidden", training.pg.baseline_hidden),
      REPRL_DOUBLE("pg", "baseline_lr", training.pg.baseline_lr),

      Field{"decision_set", "kind", true,
            [](const RunConfig& c) { return decision_name(c.training.pg.decision.kind); },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              const std::string t = trim(v);
              auto& k = c.training.pg.decision.kind;
              if (t == "policy_space") k = DecisionSetKind::PolicySpace;
              else if (t == "latent_space") k = DecisionSetKind::LatentSpace;
              else if (t == "history") k = DecisionSetKind::History;
              else bad_value(n, v, "expected policy_space, latent_space or history");
            }},
      REPRL_DOUBLE("decision_set", "nu", training.pg.decision.nu),
      REPRL_INT("decision_set", "size", training.pg.decision.size, long),
      REPRL_INT("decision_set", "history_window", training.pg.decision.history_window, int),
      REPRL_INT("decision_set", "inversion.steps", training.pg.decision.inversion_steps, int),
      REPRL_DOUBLE("decision_set", "inversion.lr", training.pg.decision.inversion_lr),
  };
  return fields;
}

#undef REPRL_DOUBLE
#undef REPRL_INT
#undef REPRL_BOOL
#undef REPRL_DIMS

std::string env_name(const Field& f) {
  std::string name = "REPRL_" + f.section + "_" + f.key;
  for (char& ch : name) ch = ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

std::string canonical_text(const RunConfig& config, bool with_run_identity) {
  std::ostringstream out;
  std::string section;
  for (const Field& f : schema()) {
    if (!with_run_identity && f.section == "run" && (f.key == "seeds" || f.key == "out_dir")) continue;
    if (f.section != section) {
      out << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

}  // namespace

void RunConfig::validate() const {
  const auto need = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw Error(ErrorKind::ConfigError, key + ": " + what);
  };
  const TrainingConfig& t = training;
  need(t.rounds >= 0, "run.rounds", "must be >= 0");
  need(!seeds.empty(), "run.seeds", "must list at least one seed");

  const GridWorldConfig& g = gridworld;
  need(g.width >= 1, "gridworld.width", "must be >= 1");
  need(g.height >= 1, "gridworld.height", "must be >= 1");
  need(g.horizon >= 1, "gridworld.horizon", "must be >= 1");
  need(g.noise_std >= 0.0, "gridworld.noise_std", "must be >= 0");
  need(g.a1 > 0.0, "gridworld.a1", "must be positive");
  need(g.a2 > 0.0, "gridworld.a2", "must be positive");
  need(g.goal_x >= 1 && g.goal_x <= g.width, "gridworld.goal_x", "must lie on the grid");
  need(g.goal_y >= 1 && g.goal_y <= g.height, "gridworld.goal_y", "must lie on the grid");
  need(g.start_x >= 1 && g.start_x <= g.width, "gridworld.start_x", "must lie on the grid");
  need(g.start_y >= 1 && g.start_y <= g.height, "gridworld.start_y", "must lie on the grid");

  const SparseLineConfig& s = sparseline;
  need(s.horizon >= 1, "sparseline.horizon", "must be >= 1");
  need(s.interval > 0.0, "sparseline.interval", "must be positive");
  need(s.step_scale > 0.0, "sparseline.step_scale", "must be positive");
  need(s.control_cost >= 0.0, "sparseline.control_cost", "must be >= 0");

  const LearnerConfig& l = t.learner;
  need(l.bandit.lambda > 0.0, "bandit.lambda", "must be positive");
  need(l.bandit.rule.alpha >= 0.0, "bandit.alpha", "must be >= 0");
  need(l.bandit.rule.sigma >= 0.0, "bandit.sigma", "must be >= 0");
  need(l.representation.latent_dim >= 1, "representation.latent_dim", "must be >= 1");
  need(l.representation.epochs >= 0, "representation.epochs", "must be >= 0");
  need(l.representation.batch_size >= 1, "representation.batch_size", "must be >= 1");
  need(l.representation.learning_rate > 0.0, "representation.learning_rate", "must be positive");
  need(l.representation.noise_var > 0.0, "representation.noise_var", "must be positive");
  need(l.inner_samples >= 1, "representation.inner_samples", "must be >= 1");

  const EsConfig& e = t.es;
  need(e.nu > 0.0, "es.nu", "must be positive");
  need(e.alpha >= 0.0, "es.alpha", "must be >= 0");
  need(e.eval_pairs >= 1, "es.eval_pairs", "must be >= 1");
  need(e.decision_size >= 1, "es.decision_size", "must be >= 1");
  need(e.mixing >= 0.0 && e.mixing <= 1.0, "es.mixing", "must be in [0, 1]");
  need(e.gamma >= 0.0 && e.gamma <= 1.0, "es.gamma", "must be in [0, 1]");

  const PgConfig& p = t.pg;
  need(p.zeta >= 0.0, "pg.zeta", "must be >= 0");
  need(p.learning_rate >= 0.0, "pg.learning_rate", "must be >= 0");
  need(p.collect >= 1, "pg.collect", "must be >= 1");
  need(p.steps >= 0, "pg.steps", "must be >= 0");
  need(p.gamma >= 0.0 && p.gamma <= 1.0, "pg.gamma", "must be in [0, 1]");
  need(p.baseline_lr > 0.0, "pg.baseline_lr", "must be positive");
  need(p.decision.nu > 0.0, "decision_set.nu", "must be positive");
  need(p.decision.size >= 1, "decision_set.size", "must be >= 1");
  need(p.decision.history_window >= 0, "decision_set.history_window", "must be >= 0");
  need(p.decision.inversion_steps >= 0, "decision_set.inversion.steps", "must be >= 0");
  need(p.decision.inversion_lr > 0.0, "decision_set.inversion.lr", "must be positive");

  const bool pg_driver = t.driver == DriverKind::RepPg || t.driver == DriverKind::Reinforce;
  need(!(pg_driver && environment == EnvironmentKind::SparseLine), "run.driver",
       to_string(t.driver) + " needs a discrete-action environment");
  need(!(t.driver == DriverKind::RepEs && p.decision.kind != DecisionSetKind::PolicySpace), "decision_set.kind",
       "repes supports policy_space only");
}

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(parse_number<std::uint64_t>("run.seeds", item));
    } else {
      const auto lo = parse_number<std::uint64_t>("run.seeds", item.substr(0, dash));
      const auto hi = parse_number<std::uint64_t>("run.seeds", item.substr(dash + 1));
      if (hi < lo) bad_value("run.seeds", item, "empty range");
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  }
  if (seeds.empty()) bad_value("run.seeds", text, "no seeds");
  return seeds;
}

RunConfig parse_config(const std::string& text, const EnvLookup& env) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::ConfigError, std::string("config syntax: ") + e.message() + " at line " +
                                            std::to_string(e.line()));
  }

  std::map<std::string, const Field*> by_name;
  for (const Field& f : schema()) by_name[f.name()] = &f;

  RunConfig config;
  bool nu_given = false;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw Error(ErrorKind::ConfigError, section + ": key outside of any section");
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw Error(ErrorKind::ConfigError, name + ": unknown key");
      it->second->set(config, name, value.data());
      nu_given = nu_given || name == "decision_set.nu";
    }
  }
  if (env) {
    for (const Field& f : schema()) {
      if (!f.scalar) continue;
      if (const auto v = env(env_name(f))) {
        f.set(config, env_name(f), *v);
        nu_given = nu_given || f.name() == "decision_set.nu";
      }
    }
  }
  if (!nu_given && config.training.pg.decision.kind == DecisionSetKind::LatentSpace)
    config.training.pg.decision.nu = 0.02;
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), env);
}

std::string serialize_config(const RunConfig& config) { return canonical_text(config, true); }

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : canonical_text(config, false)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::unique_ptr<Environment> make_environment(const RunConfig& config) {
  if (config.environment == EnvironmentKind::GridWorld) return std::make_unique<GridWorldEnv>(config.gridworld);
  return std::make_unique<SparseLineEnv>(config.sparseline);
}

std::filesystem::path metrics_path(const RunConfig& config, std::uint64_t seed) {
  return std::filesystem::path(config.out_dir) /
         (to_string(config.training.driver) + "-seed" + std::to_string(seed) + ".tsv");
}

std::filesystem::path timing_path(const RunConfig& config, std::uint64_t seed) {
  return std::filesystem::path(config.out_dir) /
         (to_string(config.training.driver) + "-seed" + std::to_string(seed) + ".timing.tsv");
}

TrainingResult run_seed(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  const auto env = make_environment(config);
  TrainingResult result = run_training(*env, config.training, seed, config_hash(config));
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + config.out_dir + ": " + ec.message());
  write_metrics(result.log, metrics_path(config, seed));
  write_timing(result.log, timing_path(config, seed));
  return result;
}

bool oracle_check(std::ostream& out, std::uint64_t seed) {
  bool all_ok = true;
  const auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    out << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    all_ok = all_ok && ok;
  };
  const auto sci = [](double v) {
    std::ostringstream s;
    s << std::scientific << std::setprecision(3) << v;
    return s.str();
  };

  const RngStream root(seed);
  const double gammas[] = {0.5, 0.9, 0.99};
  double linear_gap = 0.0, stationary_gap = 0.0, literal_gap = 0.0;
  Engine engine = root.split(1).engine();
  for (int i = 0; i < 30; ++i) {
    const Eigen::Index s = 2 + engine.index(7);
    const Eigen::Index a = 1 + engine.index(4);
    const TabularMDP mdp = random_mdp(s, a, gammas[i % 3], engine);
    const Matrix pi = random_stochastic_policy(s, a, engine);
    const Vector v = tabular_value(mdp, pi);
    const double scale = std::max(1.0, std::abs(mdp.initial.dot(v)));
    const double linear = (tabular_rho(mdp, pi).array() * mdp.reward.array()).sum();
    linear_gap = std::max(linear_gap, std::abs(linear - (1.0 - mdp.gamma) * mdp.initial.dot(v)) / scale);
    const StationaryResult st = stationary_prop1_check(mdp, pi);
    stationary_gap = std::max(stationary_gap, std::abs(st.v_tilde * (1.0 - mdp.gamma) - st.average_reward));
    const Prop1Result p1 = prop1_check(mdp, pi);
    literal_gap = std::max(literal_gap, std::abs(p1.v_tilde * (1.0 - mdp.gamma) - p1.v));
  }
  report(linear_gap <= 1e-10, "linear value form <rho, r> = (1 - gamma) E_beta v", "max gap " + sci(linear_gap));
  report(stationary_gap <= 1e-10, "inner-sampling identity (stationary start law)",
         "max gap " + sci(stationary_gap));
  out << "INFO inner-sampling identity with discounted occupancy start law: max gap " << sci(literal_gap) << '\n';

  // Monte-Carlo inner-trajectory samples against their exact expectation.
  {
    Engine e = root.split(2).engine();
    const TabularMDP mdp = random_mdp(4, 2, 0.9, e);
    const Matrix pi = random_stochastic_policy(4, 2, e);
    const int horizon = 30;
    const int n = 10000;
    const RngStream mc = root.split(3);
    Vector samples(n);
    for (int k = 0; k < n; ++k) {
      const RngStream sk = mc.split(static_cast<std::uint64_t>(k));
      const Trajectory traj = rollout_tabular(mdp, pi, horizon, sk.split(0));
      samples(k) = sample_inner(traj, mdp.gamma, sk.split(1)).g_tilde;
    }
    const double mean = samples.mean();
    const double se = std::sqrt((samples.array() - mean).square().sum() / (n - 1) / n);
    const double exact = inner_sampling_expectation(mdp, pi, horizon);
    report(std::abs(mean - exact) <= 3.0 * se, "inner-sampling Monte-Carlo mean",
           "estimate " + sci(mean) + " exact " + sci(exact) + " se " + sci(se));
  }

  // Incremental ridge against a dense solve.
  {
    Engine e = root.split(4).engine();
    const Eigen::Index d = 8;
    const double lambda = 0.1;
    BanditState bandit(d, lambda);
    Matrix x(d, 200);
    Vector y(200);
    fill_gaussian(e, x);
    fill_gaussian(e, y);
    for (Eigen::Index i = 0; i < 200; ++i) bandit.update(x.col(i), y(i));
    const Matrix v = lambda * Matrix::Identity(d, d) + x * x.transpose();
    const Vector w = v.inverse() * (x * y);
    const double gap = (bandit.estimate() - w).cwiseAbs().maxCoeff();
    report(gap <= 1e-8, "ridge estimate matches closed form", "max abs diff " + sci(gap));
  }
  return all_ok;
}

void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

int cli_main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Representation-driven policy search experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<long> rounds;
  std::string driver;
  std::string seeds;
  std::string embeddings_out;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI configuration file");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--rounds", rounds, "Override run.rounds");
    sub->add_option("--driver", driver, "Override run.driver (es, repes, reppg, reinforce)");
  };
  CLI::App* run = app.add_subcommand("run", "Train one seed and write its metrics");
  add_common(run);
  run->add_option("--seed", seed, "Seed (default: first of run.seeds)");
  CLI::App* sweep = app.add_subcommand("sweep", "Train every seed of the seed list");
  add_common(sweep);
  sweep->add_option("--seeds", seeds, "Override run.seeds, e.g. 1-30");
  CLI::App* oracle = app.add_subcommand("oracle-check", "Run the tabular identity and ridge oracle suite");
  oracle->add_option("--seed", seed, "Seed for the random instances");
  CLI::App* embed = app.add_subcommand("export-embeddings", "Train one seed and dump the embedding table");
  add_common(embed);
  embed->add_option("--seed", seed, "Seed (default: first of run.seeds)");
  embed->add_option("--file", embeddings_out, "Output file (default: <out>/<driver>-seed<N>.embeddings.tsv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code::kConfig;
  }

  try {
    if (oracle->parsed()) {
      const bool ok = oracle_check(std::cout, seed.value_or(7));
      return ok ? exit_code::kOk : exit_code::kOracle;
    }
    RunConfig config = config_path.empty() ? parse_config("", process_environment())
                                           : load_config(config_path, process_environment());
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (rounds) config.training.rounds = *rounds;
    if (!driver.empty()) {
      try {
        config.training.driver = parse_driver(driver);
      } catch (const Error&) {
        throw Error(ErrorKind::ConfigError, "--driver: unknown driver '" + driver + "'");
      }
    }
    if (!seeds.empty()) config.seeds = parse_seed_list(seeds);
    config.validate();

    if (run->parsed()) {
      const std::uint64_t s = seed.value_or(config.seeds.front());
      run_seed(config, s);
      std::cout << metrics_path(config, s).string() << '\n';
    } else if (sweep->parsed()) {
      for (const std::uint64_t s : config.seeds) {
        const TrainingResult r = run_seed(config, s);
        std::cout << metrics_path(config, s).string();
        if (!r.log.empty()) std::cout << "\tfinal_mean_return=" << r.log.records().back().mean_return;
        std::cout << '\n';
      }
    } else if (embed->parsed()) {
      if (config.training.driver != DriverKind::RepEs && config.training.driver != DriverKind::RepPg)
        throw Error(ErrorKind::ConfigError, "run.driver: embeddings need repes or reppg");
      const std::uint64_t s = seed.value_or(config.seeds.front());
      const TrainingResult r = run_seed(config, s);
      const std::filesystem::path path =
          embeddings_out.empty()
              ? std::filesystem::path(config.out_dir) /
                    (to_string(config.training.driver) + "-seed" + std::to_string(s) + ".embeddings.tsv")
              : std::filesystem::path(embeddings_out);
      std::ofstream file(path);
      if (!file) throw Error(ErrorKind::IoError, "cannot write " + path.string());
      write_embeddings(file, r.learner->rep.encoder, r.learner->history);
      std::cout << path.string() << '\n';
    }
    return exit_code::kOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::ConfigError ? exit_code::kConfig : exit_code::kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kRuntime;
  }
}

}  // namespace reprl
