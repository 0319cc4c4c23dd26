#include "imol/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace imol {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);  // '\n' line endings everywhere
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
  return out;
}

}  // namespace

std::map<SpaceId, std::vector<Outcome>> make_benchmark(const TaskHierarchy& h,
                                                       const EvalConfig& eval,
                                                       std::uint64_t seed) {
  std::map<SpaceId, std::vector<Outcome>> bench;
  Rng rng(seed ^ 0xb3ac4e6d2c1f07a9ULL);
  for (const auto& spec : h.spaces()) {
    std::vector<Outcome> goals;
    std::vector<int> idx(static_cast<size_t>(std::pow(eval.grid_per_dim, spec.dim)));
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::vector<std::vector<double>> axes;
    for (int d = 0; d < spec.dim; ++d)
      axes.push_back(linspace(spec.lo[d], spec.hi[d], eval.grid_per_dim));

    auto point_of = [&](int flat) {
      Outcome o;
      o.space = spec.id;
      o.values.resize(spec.dim);
      for (int d = spec.dim - 1; d >= 0; --d) {
        o.values[d] = axes[d][flat % eval.grid_per_dim];
        flat /= eval.grid_per_dim;
      }
      return o;
    };

    if (static_cast<int>(idx.size()) > eval.max_per_space) {
      // Fisher-Yates with the run seed, so matched seeds share benchmarks
      for (size_t i = idx.size() - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.uniform_int(static_cast<int>(i) + 1)]);
      idx.resize(eval.max_per_space);
      std::sort(idx.begin(), idx.end());
    }
    for (int i : idx) goals.push_back(point_of(i));
    bench[spec.id] = std::move(goals);
  }
  return bench;
}

namespace {

std::map<SpaceId, double> evaluate(const ExperimentConfig& cfg, const TaskHierarchy& h,
                                   const Memory& memory, ArmEnv& env,
                                   const std::map<SpaceId, std::vector<Outcome>>& bench) {
  // exploitation only: no noise, no random fallback, nothing recorded
  ModelConfig mc = cfg.models;
  mc.random_fallback = false;
  const ModelSet models(&h, &memory, mc);
  Rng dummy(0);  // resolve() draws only through the disabled fallback

  std::map<SpaceId, double> errors;
  for (const auto& [sid, goals] : bench) {
    const double floor = std::sqrt(static_cast<double>(h.space(sid).dim));
    double total = 0.0;
    for (const Outcome& goal : goals) {
      double err = floor;
      try {
        const auto seq = models.inverse_infer(sid, goal, dummy);
        const CompoundAction a = models.resolve(seq, dummy);
        const auto reached = env.execute(a);
        auto it = reached.find(sid);
        if (it != reached.end()) err = h.distance(goal, it->second);
      } catch (const EmptyModelError&) {
        // no data for some required space: maximal error for this goal
      }
      total += err;
    }
    errors[sid] = total / static_cast<double>(goals.size());
  }
  return errors;
}

void write_interest_snapshot(std::ofstream& out, int iteration, const TaskHierarchy& h,
                             const InterestMap& map) {
  for (const auto& spec : h.spaces()) {
    for (const Region& r : map.regions(spec.id)) {
      for (int st : map.available(spec.id)) {
        out << iteration << ',' << spec.name << ',' << r.creation_index << ',';
        for (int d = 0; d < 4; ++d)
          out << (d < spec.dim ? fmt(r.box.lo[d]) : "") << ',';
        for (int d = 0; d < 4; ++d)
          out << (d < spec.dim ? fmt(r.box.hi[d]) : "") << ',';
        out << r.total_entries << ',' << st << ',' << fmt(map.interest(r, st)) << '\n';
      }
    }
  }
}

}  // namespace

LearnerRunOutput run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_root) {
  const std::filesystem::path dir =
      out_root / (cfg.label + "-seed" + std::to_string(cfg.seed));
  std::filesystem::create_directories(dir);

  ArmEnv env(cfg.env);
  const TaskHierarchy& h = cfg.hierarchy;
  auto teachers = build_teachers(cfg.teachers, env, h);

  std::vector<StrategyDescriptor> strategies;
  for (const auto& spec : cfg.strategies) {
    StrategyDescriptor d;
    d.id = static_cast<int>(strategies.size());
    d.kind = spec.kind;
    d.cost = spec.cost;
    if (is_imitation(spec.kind)) {
      for (const auto& t : teachers)
        if (t.name == spec.teacher) d.teacher = t.id;
      if (d.teacher < 0) throw ConfigError("strategy references unknown teacher");
    }
    strategies.push_back(d);
  }
  const auto availability = strategy_availability(h, strategies, teachers);

  Memory memory(&h);
  ModelConfig mc = cfg.models;
  mc.action_dim = env.action_dim();
  const ModelSet models(&h, &memory, mc);
  InterestMap interest_map(&h, strategies, availability, cfg.motivation);
  const auto bench = make_benchmark(h, cfg.eval, cfg.seed);

  int forced_mimic = -1;
  if (cfg.fixed_mimic_period > 0) {
    for (const auto& s : strategies)
      if (s.kind == StrategyKind::Mimicry) forced_mimic = s.id;
    if (forced_mimic < 0)
      throw ConfigError("fixed_mimic_period requires a mimicry strategy");
  }

  Rng rng(cfg.seed);
  LearnerRunOutput out;
  out.dir = dir;

  auto choices_csv = open_out(dir / "choices.csv");
  choices_csv << "iteration,strategy_id,teacher_id,space_id,g0,g1,g2,g3,competence\n";
  auto eval_csv = open_out(dir / "eval.csv");
  eval_csv << "iteration,space,mean_error\n";
  auto interest_csv = open_out(dir / "interest.csv");
  interest_csv << "iteration,space,region,lo0,lo1,lo2,lo3,hi0,hi1,hi2,hi3,entries,"
                  "strategy_id,interest\n";

  LearnerContext ctx;
  ctx.hierarchy = &h;
  ctx.memory = &memory;
  ctx.models = &models;
  ctx.env = &env;
  ctx.expl = cfg.exploration;

  for (int it = 1; it <= cfg.budget; ++it) {
    ctx.iteration = it;
    Selection sel = interest_map.select(rng);
    if (forced_mimic >= 0 && it % cfg.fixed_mimic_period == 0) {
      const auto& avail = interest_map.available(sel.space);
      if (std::find(avail.begin(), avail.end(), forced_mimic) != avail.end())
        sel.strategy_id = forced_mimic;
    }
    const StrategyDescriptor& strat = strategies[sel.strategy_id];
    const Episode ep = apply_strategy(ctx, strat, teachers, sel.goal, rng);
    interest_map.update_and_split(ep);

    ChoiceRow row;
    row.iteration = it;
    row.strategy_id = strat.id;
    row.kind = strat.kind;
    row.teacher = strat.teacher;
    row.space = sel.space;
    row.goal = sel.goal.values;
    row.competence = ep.competence_goal;
    row.mode = sel.mode;
    out.choices.push_back(row);
    out.histogram[{strat.id, sel.space}] += 1;

    choices_csv << it << ',' << strat.id << ',';
    if (strat.teacher >= 0) choices_csv << strat.teacher;
    choices_csv << ',' << h.space(sel.space).name << ',';
    for (int d = 0; d < 4; ++d) {
      if (d < static_cast<int>(row.goal.size())) choices_csv << fmt(row.goal[d]);
      choices_csv << ',';
    }
    choices_csv << fmt(row.competence) << '\n';

    if (it % cfg.eval.cadence == 0 || it == cfg.budget) {
      if (out.eval_curve.empty() || out.eval_curve.back().first != it) {
        auto errors = evaluate(cfg, h, memory, env, bench);
        for (const auto& [sid, err] : errors)
          eval_csv << it << ',' << h.space(sid).name << ',' << fmt(err) << '\n';
        write_interest_snapshot(interest_csv, it, h, interest_map);
        out.eval_curve.emplace_back(it, std::move(errors));
      }
    }
  }

  auto hist_csv = open_out(dir / "histogram.csv");
  hist_csv << "strategy_id,kind,teacher_id,space,count\n";
  for (const auto& [key, count] : out.histogram) {
    const auto& strat = strategies[key.first];
    hist_csv << strat.id << ',' << strategy_kind_name(strat.kind) << ',';
    if (strat.teacher >= 0) hist_csv << strat.teacher;
    hist_csv << ',' << h.space(key.second).name << ',' << count << '\n';
  }

  auto bench_csv = open_out(dir / "benchmark.csv");
  bench_csv << "space,g0,g1,g2,g3\n";
  for (const auto& [sid, goals] : bench)
    for (const Outcome& g : goals) {
      bench_csv << h.space(sid).name << ',';
      for (int d = 0; d < 4; ++d) {
        if (d < static_cast<int>(g.values.size())) bench_csv << fmt(g.values[d]);
        bench_csv << (d < 3 ? "," : "");
      }
      bench_csv << '\n';
    }

  open_out(dir / "config.json") << canonical_json(cfg);
  return out;
}

// ---------------------------------------------------------------------------
// STAR runner

StarRunOutput run_star(const StarConfig& cfg, const std::filesystem::path& out_root) {
  const std::filesystem::path dir =
      out_root / (cfg.label + "-seed" + std::to_string(cfg.seed));
  std::filesystem::create_directories(dir);

  const star::GridMaze maze = cfg.maze_file.empty()
                                  ? star::GridMaze::ushape_default()
                                  : star::GridMaze::from_file(cfg.maze_file);
  StarRunOutput out;
  out.dir = dir;
  out.shortest_path = maze.shortest_path_length();

  auto episodes_csv = open_out(dir / "episodes.csv");
  episodes_csv << "episode,steps,success,splits,regions,epsilon\n";
  auto abstraction_csv = open_out(dir / "abstraction.csv");
  abstraction_csv << "episode,region,r0,c0,r1,c1\n";

  Rng rng(cfg.seed);

  auto snapshot = [&](int episode, const star::Abstraction& abs) {
    for (int i = 0; i < abs.size(); ++i) {
      const star::Rect& r = abs.regions()[i];
      abstraction_csv << episode << ',' << i << ',' << r.r0 << ',' << r.c0 << ',' << r.r1
                      << ',' << r.c1 << '\n';
    }
  };

  if (cfg.engine == "flat") {
    star::FlatQ flat(maze, cfg.agents.gamma, cfg.agents.alpha);
    for (int e = 0; e < cfg.episodes; ++e) {
      int steps = 0;
      const bool ok = flat.run_episode(maze, cfg.horizon, cfg.agents.epsilon(e), rng, &steps);
      StarEpisodeRow row{e, steps, ok, 0, 1};
      out.episodes.push_back(row);
      episodes_csv << e << ',' << steps << ',' << (ok ? 1 : 0) << ",0,1,"
                   << fmt(cfg.agents.epsilon(e)) << '\n';
    }
    out.abstraction = star::Abstraction::uniform_grid(maze, 1, 1);
    snapshot(cfg.episodes - 1, out.abstraction);
    open_out(dir / "config.json") << canonical_json(cfg);
    return out;
  }

  star::Abstraction abs = star::Abstraction::uniform_grid(maze, cfg.init_rows, cfg.init_cols);
  star::FeudalPolicies policies(maze, cfg.agents);
  star::ReachabilityStats stats;
  snapshot(0, abs);

  for (int e = 0; e < cfg.episodes; ++e) {
    const double eps = cfg.agents.epsilon(e);
    const auto res = star::run_episode(maze, abs, policies, stats, cfg.horizon, eps, rng);
    const int splits = star::refine(maze, abs, stats, policies, res.visited_regions, cfg.refine);
    StarEpisodeRow row{e, res.steps, res.success, splits, abs.size()};
    out.episodes.push_back(row);
    episodes_csv << e << ',' << res.steps << ',' << (res.success ? 1 : 0) << ',' << splits
                 << ',' << abs.size() << ',' << fmt(eps) << '\n';
    if ((e + 1) % cfg.snapshot_cadence == 0 || e + 1 == cfg.episodes) snapshot(e, abs);
  }
  out.abstraction = abs;
  open_out(dir / "config.json") << canonical_json(cfg);
  return out;
}

// ---------------------------------------------------------------------------
// compare

namespace {

struct RunRecord {
  std::string label;
  std::uint64_t seed = 0;
  std::string benchmark;                    // raw file contents
  std::map<std::string, double> final_err;  // space name -> last eval error
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MismatchedRunsError("missing file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunRecord read_run(const std::filesystem::path& dir) {
  RunRecord rec;
  const std::string cfg = slurp(dir / "config.json");
  // minimal field scrape; the canonical echo always carries label and seed
  auto find_str = [&](const std::string& key) -> std::string {
    const auto pos = cfg.find("\"" + key + "\"");
    if (pos == std::string::npos) throw MismatchedRunsError("config.json lacks " + key);
    auto colon = cfg.find(':', pos);
    auto start = cfg.find_first_not_of(" \t", colon + 1);
    if (cfg[start] == '"') {
      auto end = cfg.find('"', start + 1);
      return cfg.substr(start + 1, end - start - 1);
    }
    auto end = cfg.find_first_of(",\n}", start);
    return cfg.substr(start, end - start);
  };
  rec.label = find_str("label");
  rec.seed = std::stoull(find_str("seed"));
  rec.benchmark = slurp(dir / "benchmark.csv");

  std::istringstream eval(slurp(dir / "eval.csv"));
  std::string line;
  std::getline(eval, line);  // header
  std::map<std::string, std::pair<int, double>> last;
  while (std::getline(eval, line)) {
    std::istringstream row(line);
    std::string it_s, space, err_s;
    std::getline(row, it_s, ',');
    std::getline(row, space, ',');
    std::getline(row, err_s, ',');
    const int it = std::stoi(it_s);
    auto& e = last[space];
    if (it >= e.first) e = {it, std::stod(err_s)};
  }
  if (last.empty()) throw MismatchedRunsError("eval.csv has no rows: " + dir.string());
  for (const auto& [space, p] : last) rec.final_err[space] = p.second;
  return rec;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * (v.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace

std::string compare_runs(const std::vector<std::filesystem::path>& run_dirs,
                         const std::filesystem::path& out_file) {
  if (run_dirs.size() < 2) throw MismatchedRunsError("compare needs at least two runs");
  std::vector<RunRecord> runs;
  for (const auto& d : run_dirs) runs.push_back(read_run(d));

  // benchmarks must match across labels for every shared seed
  std::map<std::uint64_t, std::string> seed_bench;
  for (const auto& r : runs) {
    auto it = seed_bench.find(r.seed);
    if (it == seed_bench.end())
      seed_bench[r.seed] = r.benchmark;
    else if (it->second != r.benchmark)
      throw MismatchedRunsError("benchmarks differ for seed " + std::to_string(r.seed));
  }

  std::set<std::string> spaces, labels;
  for (const auto& r : runs) {
    labels.insert(r.label);
    for (const auto& [s, _] : r.final_err) spaces.insert(s);
  }

  std::ostringstream table;
  table << "space,label,median_final_error,iqr,seeds,winner\n";
  for (const auto& space : spaces) {
    std::map<std::string, std::vector<double>> per_label;
    for (const auto& r : runs) {
      auto it = r.final_err.find(space);
      if (it == r.final_err.end())
        throw MismatchedRunsError("run " + r.label + " lacks eval for space " + space);
      per_label[r.label].push_back(it->second);
    }
    std::string winner;
    double best = 0.0;
    for (const auto& [label, errs] : per_label) {
      const double m = median(errs);
      if (winner.empty() || m < best) {
        best = m;
        winner = label;
      }
    }
    for (const auto& [label, errs] : per_label)
      table << space << ',' << label << ',' << fmt(median(errs)) << ',' << fmt(iqr(errs))
            << ',' << errs.size() << ',' << (label == winner ? 1 : 0) << '\n';
  }

  const std::string text = table.str();
  if (!out_file.empty()) open_out(out_file) << text;
  return text;
}

}  // namespace imol
