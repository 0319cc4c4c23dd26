#include "imol/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace imol {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ConfigError(origin + ": " + what);
}

std::string line_of_byte(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(origin, "parse error at " + line_of_byte(text, e.byte) + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T def, const std::string& origin) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(origin, "field '" + key + "': " + e.what());
  }
}

Vec get_vec(const json& j, const std::string& key, const std::string& origin) {
  try {
    return j.at(key).get<Vec>();
  } catch (const json::exception& e) {
    fail(origin, "field '" + key + "': " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

StrategyKind strategy_kind_from_name(const std::string& name) {
  if (name == "autonomous-action") return StrategyKind::AutonomousAction;
  if (name == "autonomous-procedure") return StrategyKind::AutonomousProcedure;
  if (name == "mimicry") return StrategyKind::Mimicry;
  if (name == "emulation") return StrategyKind::Emulation;
  if (name == "procedural-imitation") return StrategyKind::ProceduralImitation;
  throw ConfigError("unknown strategy kind: " + name);
}

bool is_star_config_file(const std::filesystem::path& path) {
  const json j = parse_json(read_file(path), path.string());
  return j.contains("engine") || j.contains("episodes");
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
  const json j = parse_json(text, origin);
  ExperimentConfig cfg;
  cfg.label = get_or<std::string>(j, "label", cfg.label, origin);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, origin);
  cfg.budget = get_or<int>(j, "budget", cfg.budget, origin);
  if (cfg.budget < 1) fail(origin, "field 'budget': must be >= 1");

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    cfg.eval.cadence = get_or<int>(e, "cadence", cfg.eval.cadence, origin);
    cfg.eval.grid_per_dim = get_or<int>(e, "grid_per_dim", cfg.eval.grid_per_dim, origin);
    cfg.eval.max_per_space = get_or<int>(e, "max_per_space", cfg.eval.max_per_space, origin);
    if (cfg.eval.cadence < 1) fail(origin, "field 'eval.cadence': must be >= 1");
  }

  if (j.contains("env")) {
    const json& e = j.at("env");
    if (e.contains("links")) {
      const Vec links = get_vec(e, "links", origin);
      if (links.size() != 3) fail(origin, "field 'env.links': expected 3 lengths");
      for (int i = 0; i < 3; ++i) cfg.env.link_lengths[i] = links[i];
    }
    if (e.contains("pen")) {
      const Vec pen = get_vec(e, "pen", origin);
      if (pen.size() != 2) fail(origin, "field 'env.pen': expected 2 coordinates");
      cfg.env.pen_position = {pen[0], pen[1]};
    }
    cfg.env.grasp_radius = get_or<double>(e, "grasp_radius", cfg.env.grasp_radius, origin);
    cfg.env.canvas_half_extent = get_or<double>(e, "canvas", cfg.env.canvas_half_extent, origin);
    cfg.env.micro_steps = get_or<int>(e, "micro_steps", cfg.env.micro_steps, origin);
    if (cfg.env.grasp_radius <= 0.0) fail(origin, "field 'env.grasp_radius': must be > 0");
  }

  // hierarchy: by name, defaulting to the arm world's three spaces
  if (j.contains("hierarchy")) {
    const json& h = j.at("hierarchy");
    std::map<std::string, SpaceId> ids;
    SpaceId next = 0;
    TaskHierarchy th;
    for (const json& s : h.at("spaces")) {
      SpaceSpec spec;
      spec.id = next++;
      spec.name = s.at("name").get<std::string>();
      spec.dim = s.at("dim").get<int>();
      spec.lo = get_vec(s, "lo", origin);
      spec.hi = get_vec(s, "hi", origin);
      ids[spec.name] = spec.id;
      try {
        th.add_space(spec);
      } catch (const std::exception& e) {
        fail(origin, "hierarchy space '" + spec.name + "': " + e.what());
      }
    }
    for (const json& s : h.at("spaces")) {
      const std::string name = s.at("name").get<std::string>();
      std::vector<SpaceId> comps;
      for (const json& c : s.value("components", json::array())) {
        const std::string cn = c.get<std::string>();
        if (cn == "actions") {
          comps.push_back(kActionSpace);
        } else if (ids.count(cn)) {
          comps.push_back(ids.at(cn));
        } else {
          fail(origin, "hierarchy component '" + cn + "' is not a declared space");
        }
      }
      try {
        th.set_components(ids.at(name), comps);
      } catch (const std::exception& e) {
        fail(origin, "hierarchy components of '" + name + "': " + e.what());
      }
    }
    cfg.hierarchy = std::move(th);
  } else {
    cfg.hierarchy = ArmEnv::default_hierarchy(cfg.env);
  }

  if (j.contains("models")) {
    const json& m = j.at("models");
    cfg.models.knn_k = get_or<int>(m, "knn_k", cfg.models.knn_k, origin);
    cfg.models.blend_epsilon = get_or<double>(m, "blend_epsilon", cfg.models.blend_epsilon, origin);
    if (cfg.models.knn_k < 1) fail(origin, "field 'models.knn_k': must be >= 1");
  }

  if (j.contains("motivation")) {
    const json& m = j.at("motivation");
    cfg.motivation.split_threshold =
        get_or<int>(m, "g_max", cfg.motivation.split_threshold, origin);
    cfg.motivation.progress_window = get_or<int>(m, "window", cfg.motivation.progress_window, origin);
    cfg.motivation.interest_init =
        get_or<double>(m, "interest_init", cfg.motivation.interest_init, origin);
    cfg.motivation.interest_floor =
        get_or<double>(m, "interest_floor", cfg.motivation.interest_floor, origin);
    if (m.contains("mode_probs")) {
      const Vec p = get_vec(m, "mode_probs", origin);
      if (p.size() != 3) fail(origin, "field 'motivation.mode_probs': expected 3 entries");
      cfg.motivation.mode_probs = {p[0], p[1], p[2]};
    }
    const double sum = cfg.motivation.mode_probs[0] + cfg.motivation.mode_probs[1] +
                       cfg.motivation.mode_probs[2];
    if (std::abs(sum - 1.0) > 1e-9)
      fail(origin, "field 'motivation.mode_probs': must sum to 1");
  }

  if (j.contains("exploration")) {
    const json& e = j.at("exploration");
    auto& x = cfg.exploration;
    x.noise_base = get_or<double>(e, "noise_base", x.noise_base, origin);
    x.noise_scale = get_or<double>(e, "noise_scale", x.noise_scale, origin);
    x.noise_locality = get_or<double>(e, "noise_locality", x.noise_locality, origin);
    x.local_radius = get_or<double>(e, "local_radius", x.local_radius, origin);
    x.procedure_reuse_prob = get_or<double>(e, "procedure_reuse_prob", x.procedure_reuse_prob, origin);
    x.procedure_noise_sd = get_or<double>(e, "procedure_noise_sd", x.procedure_noise_sd, origin);
    x.procedure_length = get_or<int>(e, "procedure_length", x.procedure_length, origin);
    x.mimic_learner_sd = get_or<double>(e, "mimic_learner_sd", x.mimic_learner_sd, origin);
  }

  if (!j.contains("strategies") || j.at("strategies").empty())
    fail(origin, "field 'strategies': at least one strategy is required");
  for (const json& s : j.at("strategies")) {
    StrategySpec spec;
    spec.kind = strategy_kind_from_name(s.at("kind").get<std::string>());
    spec.teacher = get_or<std::string>(s, "teacher", "", origin);
    spec.cost = get_or<double>(s, "cost", is_imitation(spec.kind) ? 0.7 : 1.0, origin);
    if (spec.cost <= 0.0 || spec.cost > 1.0)
      fail(origin, "field 'strategies.cost': must be in (0, 1]");
    if (is_imitation(spec.kind) && spec.teacher.empty())
      fail(origin, "imitation strategies must name a teacher");
    cfg.strategies.push_back(std::move(spec));
  }

  for (const json& t : j.value("teachers", json::array())) {
    TeacherSpec spec;
    spec.name = t.at("name").get<std::string>();
    for (const json& e : t.at("expert")) {
      const std::string en = e.get<std::string>();
      bool found = false;
      for (const auto& sp : cfg.hierarchy.spaces())
        if (sp.name == en) {
          spec.expertise.push_back(sp.id);
          found = true;
        }
      if (!found) fail(origin, "teacher '" + spec.name + "': unknown space '" + en + "'");
    }
    spec.demo_kind = get_or<std::string>(t, "demo_kind", spec.demo_kind, origin);
    spec.grid_per_dim = get_or<int>(t, "grid_per_dim", spec.grid_per_dim, origin);
    spec.repertoire_cap = get_or<int>(t, "repertoire_cap", spec.repertoire_cap, origin);
    spec.noise_sd = get_or<double>(t, "noise_sd", spec.noise_sd, origin);
    spec.cost = get_or<double>(t, "cost", spec.cost, origin);
    if (spec.noise_sd < 0.0) fail(origin, "teacher noise_sd must be >= 0");
    cfg.teachers.push_back(std::move(spec));
  }

  // imitation strategies must reference declared teachers
  for (const auto& s : cfg.strategies) {
    if (!is_imitation(s.kind)) continue;
    bool found = false;
    for (const auto& t : cfg.teachers)
      if (t.name == s.teacher) found = true;
    if (!found) fail(origin, "strategy references unknown teacher '" + s.teacher + "'");
  }

  cfg.fixed_mimic_period = get_or<int>(j, "fixed_mimic_period", 0, origin);
  if (cfg.fixed_mimic_period < 0) fail(origin, "field 'fixed_mimic_period': must be >= 0");
  return cfg;
}

StarConfig parse_star_config(const std::string& text, const std::string& origin) {
  const json j = parse_json(text, origin);
  StarConfig cfg;
  cfg.label = get_or<std::string>(j, "label", cfg.label, origin);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, origin);
  cfg.engine = get_or<std::string>(j, "engine", cfg.engine, origin);
  if (cfg.engine != "star" && cfg.engine != "flat")
    fail(origin, "field 'engine': must be 'star' or 'flat'");
  cfg.episodes = get_or<int>(j, "episodes", cfg.episodes, origin);
  if (cfg.episodes < 1) fail(origin, "field 'episodes': must be >= 1");
  cfg.horizon = get_or<int>(j, "horizon", cfg.horizon, origin);
  if (cfg.horizon < 1) fail(origin, "field 'horizon': must be >= 1");
  cfg.maze_file = get_or<std::string>(j, "maze_file", "", origin);

  if (j.contains("agents")) {
    const json& a = j.at("agents");
    cfg.agents.commander_horizon = get_or<int>(a, "k", cfg.agents.commander_horizon, origin);
    cfg.agents.tutor_horizon = get_or<int>(a, "l", cfg.agents.tutor_horizon, origin);
    cfg.agents.gamma = get_or<double>(a, "gamma", cfg.agents.gamma, origin);
    cfg.agents.alpha = get_or<double>(a, "alpha", cfg.agents.alpha, origin);
    cfg.agents.eps_start = get_or<double>(a, "eps_start", cfg.agents.eps_start, origin);
    cfg.agents.eps_end = get_or<double>(a, "eps_end", cfg.agents.eps_end, origin);
    cfg.agents.eps_decay_episodes =
        get_or<int>(a, "eps_decay_episodes", cfg.agents.eps_decay_episodes, origin);
  }
  try {
    cfg.agents.validate();
  } catch (const std::exception& e) {
    fail(origin, std::string("field 'agents': ") + e.what());
  }

  if (j.contains("refine")) {
    const json& r = j.at("refine");
    cfg.refine.enabled = get_or<bool>(r, "enabled", cfg.refine.enabled, origin);
    cfg.refine.min_attempts = get_or<int>(r, "n_min", cfg.refine.min_attempts, origin);
    cfg.refine.high_rate = get_or<double>(r, "high", cfg.refine.high_rate, origin);
    cfg.refine.low_rate = get_or<double>(r, "low", cfg.refine.low_rate, origin);
    if (!(cfg.refine.high_rate > cfg.refine.low_rate))
      fail(origin, "field 'refine': high rate must exceed low rate");
  }

  if (j.contains("init_regions")) {
    const auto v = j.at("init_regions");
    if (!v.is_array() || v.size() != 2) fail(origin, "field 'init_regions': expected [rows, cols]");
    cfg.init_rows = v[0].get<int>();
    cfg.init_cols = v[1].get<int>();
    if (cfg.init_rows < 1 || cfg.init_cols < 1)
      fail(origin, "field 'init_regions': must be >= 1");
  }
  cfg.snapshot_cadence = get_or<int>(j, "snapshot_cadence", cfg.snapshot_cadence, origin);
  if (cfg.snapshot_cadence < 1) fail(origin, "field 'snapshot_cadence': must be >= 1");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_file(path), path.string());
}

StarConfig load_star_config(const std::filesystem::path& path) {
  return parse_star_config(read_file(path), path.string());
}

namespace {

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["label"] = cfg.label;
  j["seed"] = cfg.seed;
  j["budget"] = cfg.budget;
  j["eval"] = {{"cadence", cfg.eval.cadence},
               {"grid_per_dim", cfg.eval.grid_per_dim},
               {"max_per_space", cfg.eval.max_per_space}};
  j["env"] = {{"links", cfg.env.link_lengths},
              {"pen", cfg.env.pen_position},
              {"grasp_radius", cfg.env.grasp_radius},
              {"canvas", cfg.env.canvas_half_extent},
              {"micro_steps", cfg.env.micro_steps}};
  json spaces = json::array();
  for (const auto& s : cfg.hierarchy.spaces()) {
    json comps = json::array();
    for (SpaceId c : cfg.hierarchy.components(s.id))
      comps.push_back(c == kActionSpace ? "actions" : cfg.hierarchy.space(c).name);
    spaces.push_back({{"name", s.name},
                      {"dim", s.dim},
                      {"lo", s.lo},
                      {"hi", s.hi},
                      {"components", comps}});
  }
  j["hierarchy"] = {{"spaces", spaces}};
  j["models"] = {{"knn_k", cfg.models.knn_k}, {"blend_epsilon", cfg.models.blend_epsilon}};
  j["motivation"] = {{"g_max", cfg.motivation.split_threshold},
                     {"window", cfg.motivation.progress_window},
                     {"interest_init", cfg.motivation.interest_init},
                     {"interest_floor", cfg.motivation.interest_floor},
                     {"mode_probs", cfg.motivation.mode_probs}};
  const auto& x = cfg.exploration;
  j["exploration"] = {{"noise_base", x.noise_base},
                      {"noise_scale", x.noise_scale},
                      {"noise_locality", x.noise_locality},
                      {"local_radius", x.local_radius},
                      {"procedure_reuse_prob", x.procedure_reuse_prob},
                      {"procedure_noise_sd", x.procedure_noise_sd},
                      {"procedure_length", x.procedure_length},
                      {"mimic_learner_sd", x.mimic_learner_sd}};
  json strategies = json::array();
  for (const auto& s : cfg.strategies) {
    json e = {{"kind", strategy_kind_name(s.kind)}, {"cost", s.cost}};
    if (!s.teacher.empty()) e["teacher"] = s.teacher;
    strategies.push_back(e);
  }
  j["strategies"] = strategies;
  json teachers = json::array();
  for (const auto& t : cfg.teachers) {
    json names = json::array();
    for (SpaceId s : t.expertise) names.push_back(cfg.hierarchy.space(s).name);
    teachers.push_back({{"name", t.name},
                        {"expert", names},
                        {"demo_kind", t.demo_kind},
                        {"grid_per_dim", t.grid_per_dim},
                        {"repertoire_cap", t.repertoire_cap},
                        {"noise_sd", t.noise_sd},
                        {"cost", t.cost}});
  }
  j["teachers"] = teachers;
  j["fixed_mimic_period"] = cfg.fixed_mimic_period;
  return j;
}

json to_json(const StarConfig& cfg) {
  json j;
  j["label"] = cfg.label;
  j["seed"] = cfg.seed;
  j["engine"] = cfg.engine;
  j["episodes"] = cfg.episodes;
  j["horizon"] = cfg.horizon;
  j["maze_file"] = cfg.maze_file;
  j["agents"] = {{"k", cfg.agents.commander_horizon},
                 {"l", cfg.agents.tutor_horizon},
                 {"gamma", cfg.agents.gamma},
                 {"alpha", cfg.agents.alpha},
                 {"eps_start", cfg.agents.eps_start},
                 {"eps_end", cfg.agents.eps_end},
                 {"eps_decay_episodes", cfg.agents.eps_decay_episodes}};
  j["refine"] = {{"enabled", cfg.refine.enabled},
                 {"n_min", cfg.refine.min_attempts},
                 {"high", cfg.refine.high_rate},
                 {"low", cfg.refine.low_rate}};
  j["init_regions"] = {cfg.init_rows, cfg.init_cols};
  j["snapshot_cadence"] = cfg.snapshot_cadence;
  return j;
}

}  // namespace

std::string canonical_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }
std::string canonical_json(const StarConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace imol
