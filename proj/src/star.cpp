#include "imol/star.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace imol::star {

// ---------------------------------------------------------------------------
// GridMaze

GridMaze GridMaze::from_text(const std::string& text) {
  GridMaze m;
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw std::invalid_argument("empty maze");
  m.height_ = static_cast<int>(rows.size());
  m.width_ = static_cast<int>(rows[0].size());
  m.walls_.assign(m.width_ * m.height_, 0);
  bool have_start = false, have_goal = false;
  for (int r = 0; r < m.height_; ++r) {
    if (static_cast<int>(rows[r].size()) != m.width_)
      throw std::invalid_argument("ragged maze rows");
    for (int c = 0; c < m.width_; ++c) {
      switch (rows[r][c]) {
        case '#': m.walls_[r * m.width_ + c] = 1; break;
        case '.': break;
        case 'S': m.start_ = {r, c}; have_start = true; break;
        case 'G': m.goal_ = {r, c}; have_goal = true; break;
        default: throw std::invalid_argument("unknown maze character");
      }
    }
  }
  if (!have_start || !have_goal) throw std::invalid_argument("maze needs S and G");
  m.validate();
  return m;
}

GridMaze GridMaze::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open maze file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

GridMaze GridMaze::ushape_default() {
  // '⊃' corridor: along the bottom, up the right side, back along the top
  return from_text(
      "G........\n"
      "########.\n"
      "########.\n"
      "########.\n"
      "########.\n"
      "########.\n"
      "########.\n"
      "########.\n"
      "S........\n");
}

void GridMaze::validate() const {
  if (wall(start_) || wall(goal_)) throw std::invalid_argument("start or goal on a wall");
  if (shortest_path_length() < 0) throw std::invalid_argument("maze corridor not connected");
}

bool GridMaze::wall(int row, int col) const {
  if (row < 0 || row >= height_ || col < 0 || col >= width_) return true;
  return walls_[row * width_ + col] != 0;
}

Cell GridMaze::step(Cell from, Action a) const {
  Cell to = from;
  switch (a) {
    case kUp: to.row -= 1; break;
    case kDown: to.row += 1; break;
    case kLeft: to.col -= 1; break;
    case kRight: to.col += 1; break;
  }
  return wall(to) ? from : to;
}

double GridMaze::goal_distance(Cell c) const {
  const double dr = c.row - goal_.row;
  const double dc = c.col - goal_.col;
  const double diag = std::sqrt(static_cast<double>(width_ * width_ + height_ * height_));
  return std::sqrt(dr * dr + dc * dc) / diag;
}

int GridMaze::shortest_path_length() const {
  std::vector<int> dist(num_cells(), -1);
  std::deque<Cell> queue;
  dist[cell_index(start_)] = 0;
  queue.push_back(start_);
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == goal_) return dist[cell_index(c)];
    for (int a = 0; a < 4; ++a) {
      const Cell n = step(c, static_cast<Action>(a));
      if (dist[cell_index(n)] < 0) {
        dist[cell_index(n)] = dist[cell_index(c)] + 1;
        queue.push_back(n);
      }
    }
  }
  return -1;
}

// ---------------------------------------------------------------------------
// Abstraction

Abstraction Abstraction::uniform_grid(const GridMaze& maze, int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("abstraction grid must be >= 1x1");
  Abstraction a;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      Rect r;
      r.r0 = i * maze.height() / rows;
      r.r1 = (i + 1) * maze.height() / rows - 1;
      r.c0 = j * maze.width() / cols;
      r.c1 = (j + 1) * maze.width() / cols - 1;
      if (r.r1 >= r.r0 && r.c1 >= r.c0) a.regions_.push_back(r);
    }
  a.check_partition(maze);
  return a;
}

int Abstraction::region_of(Cell c) const {
  for (size_t i = 0; i < regions_.size(); ++i)
    if (regions_[i].contains(c)) return static_cast<int>(i);
  throw std::logic_error("abstraction does not cover cell");
}

int Abstraction::split(int idx, int dim, int threshold) {
  Rect& r = regions_.at(idx);
  Rect upper = r;
  if (dim == 0) {
    if (!(threshold > r.r0 && threshold <= r.r1))
      throw std::invalid_argument("bad split threshold");
    upper.r0 = threshold;
    r.r1 = threshold - 1;
  } else {
    if (!(threshold > r.c0 && threshold <= r.c1))
      throw std::invalid_argument("bad split threshold");
    upper.c0 = threshold;
    r.c1 = threshold - 1;
  }
  regions_.push_back(upper);
  return static_cast<int>(regions_.size()) - 1;
}

void Abstraction::check_partition(const GridMaze& maze) const {
  for (int r = 0; r < maze.height(); ++r)
    for (int c = 0; c < maze.width(); ++c) {
      int n = 0;
      for (const Rect& rect : regions_)
        if (rect.contains({r, c})) ++n;
      if (n != 1) throw std::logic_error("abstraction is not a partition");
    }
}

// ---------------------------------------------------------------------------
// FeudalConfig / ReachabilityStats

void FeudalConfig::validate() const {
  if (!(commander_horizon > tutor_horizon && tutor_horizon > 1))
    throw std::invalid_argument("horizons must satisfy k > l > 1");
  if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma must be in (0,1)");
  if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in (0,1]");
}

double FeudalConfig::epsilon(int episode) const {
  if (eps_decay_episodes <= 0) return eps_end;
  const double f = std::min(1.0, static_cast<double>(episode) / eps_decay_episodes);
  return eps_start + f * (eps_end - eps_start);
}

void ReachabilityStats::record_span(int from_region, int target_region, int start_cell,
                                    bool success) {
  auto& p = pair_stats_[{from_region, target_region}];
  p.first += 1;
  p.second += success ? 1 : 0;
  auto& c = cell_stats_[{start_cell, target_region}];
  c.first += 1;
  c.second += success ? 1 : 0;
}

std::optional<double> ReachabilityStats::rate(int i, int j) const {
  auto it = pair_stats_.find({i, j});
  if (it == pair_stats_.end() || it->second.first == 0) return std::nullopt;
  return static_cast<double>(it->second.second) / it->second.first;
}

int ReachabilityStats::attempts(int i, int j) const {
  auto it = pair_stats_.find({i, j});
  return it == pair_stats_.end() ? 0 : it->second.first;
}

std::optional<double> ReachabilityStats::cell_rate(int cell, int target) const {
  auto it = cell_stats_.find({cell, target});
  if (it == cell_stats_.end() || it->second.first == 0) return std::nullopt;
  return static_cast<double>(it->second.second) / it->second.first;
}

int ReachabilityStats::cell_attempts(int cell, int target) const {
  auto it = cell_stats_.find({cell, target});
  return it == cell_stats_.end() ? 0 : it->second.first;
}

void ReachabilityStats::reset_region(int region) {
  std::erase_if(pair_stats_, [&](const auto& kv) {
    return kv.first.first == region || kv.first.second == region;
  });
  std::erase_if(cell_stats_, [&](const auto& kv) { return kv.first.second == region; });
}

// ---------------------------------------------------------------------------
// FeudalPolicies

FeudalPolicies::FeudalPolicies(const GridMaze& maze, const FeudalConfig& cfg)
    : cfg_(cfg), num_cells_(maze.num_cells()) {
  cfg_.validate();
  controller_.assign(static_cast<size_t>(num_cells_) * num_cells_ * 4, 0.0);
}

double& FeudalPolicies::commander_q(int from, int target) {
  return commander_[{from, target}];
}

double& FeudalPolicies::tutor_q(int cell, int target, int subgoal) {
  return tutor_[{cell, target, subgoal}];
}

double& FeudalPolicies::controller_q(int cell, int subgoal, Action a) {
  return controller_[(static_cast<size_t>(cell) * num_cells_ + subgoal) * 4 + a];
}

double FeudalPolicies::controller_q(int cell, int subgoal, Action a) const {
  return controller_[(static_cast<size_t>(cell) * num_cells_ + subgoal) * 4 + a];
}

int FeudalPolicies::pick_commander_goal(int from, int num_regions, double eps, Rng& rng) {
  if (rng.uniform() < eps) return rng.uniform_int(num_regions);
  int best = 0;
  double best_q = -1e300;
  for (int g = 0; g < num_regions; ++g) {
    auto it = commander_.find({from, g});
    const double q = it == commander_.end() ? 0.0 : it->second;
    if (q > best_q) {
      best_q = q;
      best = g;
    }
  }
  return best;
}

int FeudalPolicies::pick_tutor_subgoal(int cell, int target,
                                       const std::vector<int>& candidates, double eps,
                                       Rng& rng) {
  if (rng.uniform() < eps)
    return candidates[rng.uniform_int(static_cast<int>(candidates.size()))];
  int best = candidates[0];
  double best_q = -1e300;
  for (int g : candidates) {
    auto it = tutor_.find({cell, target, g});
    const double q = it == tutor_.end() ? 0.0 : it->second;
    if (q > best_q) {
      best_q = q;
      best = g;
    }
  }
  return best;
}

Action FeudalPolicies::pick_controller_action(int cell, int subgoal, double eps, Rng& rng) {
  if (rng.uniform() < eps) return static_cast<Action>(rng.uniform_int(4));
  int best = 0;
  double best_q = controller_q(cell, subgoal, static_cast<Action>(0));
  for (int a = 1; a < 4; ++a) {
    const double q = controller_q(cell, subgoal, static_cast<Action>(a));
    if (q > best_q) {
      best_q = q;
      best = a;
    }
  }
  return static_cast<Action>(best);
}

void FeudalPolicies::on_region_split(int parent, int child) {
  // duplicate Commander rows and columns touching the parent
  std::vector<std::pair<std::pair<int, int>, double>> add;
  for (const auto& [key, q] : commander_) {
    const auto [s, t] = key;
    const bool srow = s == parent, tcol = t == parent;
    if (srow) add.push_back({{child, t}, q});
    if (tcol) add.push_back({{s, child}, q});
    if (srow && tcol) add.push_back({{child, child}, q});
  }
  for (const auto& [key, q] : add) commander_[key] = q;

  std::vector<std::pair<std::tuple<int, int, int>, double>> tadd;
  for (const auto& [key, q] : tutor_)
    if (std::get<1>(key) == parent)
      tadd.push_back({{std::get<0>(key), child, std::get<2>(key)}, q});
  for (const auto& [key, q] : tadd) tutor_[key] = q;
}

// ---------------------------------------------------------------------------
// Tutor candidates

std::vector<int> tutor_candidates(const GridMaze& maze, const Abstraction& abs,
                                  int target_region) {
  std::set<int> cells;
  const Rect& r = abs.regions().at(target_region);
  for (int row = r.r0 - 1; row <= r.r1 + 1; ++row)
    for (int col = r.c0 - 1; col <= r.c1 + 1; ++col) {
      if (maze.wall(row, col)) continue;
      const bool inside = r.contains({row, col});
      const bool frontier = !inside;  // already limited to the 1-cell ring
      if (inside || frontier) cells.insert(maze.cell_index({row, col}));
    }
  return {cells.begin(), cells.end()};
}

// ---------------------------------------------------------------------------
// run_episode

EpisodeResult run_episode(const GridMaze& maze, const Abstraction& abs,
                          FeudalPolicies& policies, ReachabilityStats& stats, int horizon,
                          double eps, Rng& rng) {
  const FeudalConfig& cfg = policies.config();
  const int k = cfg.commander_horizon;
  const int l = cfg.tutor_horizon;

  EpisodeResult res;
  Cell s = maze.start();
  res.trace.push_back(s);
  auto note_region = [&](Cell c) {
    const int r = abs.region_of(c);
    if (std::find(res.visited_regions.begin(), res.visited_regions.end(), r) ==
        res.visited_regions.end())
      res.visited_regions.push_back(r);
  };
  note_region(s);

  // commander span state
  int span_start_region = -1, span_start_cell = -1, commanded = -1;
  int span_t0 = 0, span_steps = 0;
  bool span_entered = false;
  double span_reward = 0.0;  // discounted r_ext accumulation

  // tutor span state
  int tutor_start_cell = -1, subgoal = -1;
  int tutor_steps = 0;
  bool tutor_entered = false;
  std::vector<int> candidates;

  auto close_commander = [&](Cell at, bool terminal) {
    if (commanded < 0) return;
    // SMDP backup over the span's accumulated external reward
    double boot = 0.0;
    if (!terminal) {
      boot = -1e300;
      const int at_region = abs.region_of(at);
      for (int g = 0; g < abs.size(); ++g)
        boot = std::max(boot, policies.commander_q(at_region, g));
    }
    double& q = policies.commander_q(span_start_region, commanded);
    const double target = span_reward + std::pow(cfg.gamma, span_steps) * boot;
    q += cfg.alpha * (target - q);
    // a span only counts as reachability evidence when its window completed
    // or it succeeded; an unfinished window says nothing about failure
    const bool counted = span_steps == k || span_entered;
    if (counted)
      stats.record_span(span_start_region, commanded, span_start_cell, span_entered);
    res.spans.push_back({span_t0, span_steps, span_start_region, span_start_cell,
                         commanded, span_entered, counted});
  };

  auto close_tutor = [&](Cell at, bool commander_changed) {
    if (subgoal < 0) return;
    double& q = policies.tutor_q(tutor_start_cell, commanded, subgoal);
    const double r = tutor_entered ? 1.0 : 0.0;
    double boot = 0.0;
    if (!commander_changed) {
      boot = -1e300;
      for (int g : candidates)
        boot = std::max(boot, policies.tutor_q(maze.cell_index(at), commanded, g));
    }
    const double target = r + std::pow(cfg.gamma, tutor_steps) * boot;
    q += cfg.alpha * (target - q);
  };

  for (int t = 0; t < horizon; ++t) {
    if (t % k == 0) {
      close_tutor(s, true);
      close_commander(s, false);
      span_start_region = abs.region_of(s);
      span_start_cell = maze.cell_index(s);
      commanded = policies.pick_commander_goal(span_start_region, abs.size(), eps, rng);
      span_t0 = t;
      span_steps = 0;
      span_entered = false;
      span_reward = 0.0;
      candidates = tutor_candidates(maze, abs, commanded);
      if (candidates.empty()) candidates = {span_start_cell};  // wall-only region
      subgoal = -1;
      tutor_steps = 0;
    }
    if ((t % k) % l == 0) {
      if (subgoal >= 0) close_tutor(s, false);
      tutor_start_cell = maze.cell_index(s);
      subgoal = policies.pick_tutor_subgoal(tutor_start_cell, commanded, candidates, eps, rng);
      tutor_steps = 0;
      tutor_entered = false;
    }

    const int cell = maze.cell_index(s);
    const Action a = policies.pick_controller_action(cell, subgoal, eps, rng);
    const Cell next = maze.step(s, a);
    const int next_cell = maze.cell_index(next);

    // controller: subgoal reach is terminal for its one-step task
    const bool hit = next_cell == subgoal;
    double boot = 0.0;
    if (!hit) {
      boot = policies.controller_q(next_cell, subgoal, static_cast<Action>(0));
      for (int aa = 1; aa < 4; ++aa)
        boot = std::max(boot, policies.controller_q(next_cell, subgoal,
                                                    static_cast<Action>(aa)));
    }
    double& cq = policies.controller_q(cell, subgoal, a);
    cq += cfg.alpha * ((hit ? 1.0 : 0.0) + cfg.gamma * boot - cq);

    span_reward += std::pow(cfg.gamma, span_steps) * (-maze.goal_distance(next));
    span_steps += 1;
    tutor_steps += 1;
    if (abs.region_of(next) == commanded) {
      span_entered = true;
      tutor_entered = true;
    }

    s = next;
    res.trace.push_back(s);
    note_region(s);
    res.steps = t + 1;

    if (s == maze.goal()) {
      res.success = true;
      break;
    }
  }

  close_tutor(s, true);
  close_commander(s, res.success);
  return res;
}

// ---------------------------------------------------------------------------
// refine

namespace {

struct SplitChoice {
  int dim = -1;
  int threshold = 0;
  int correct = -1;
  int target = -1;
};

}  // namespace

int refine(const GridMaze& maze, Abstraction& abs, ReachabilityStats& stats,
           FeudalPolicies& policies, const std::vector<int>& visited,
           const RefineConfig& cfg) {
  if (!cfg.enabled) return 0;
  int splits = 0;

  for (int region : visited) {
    if (region >= abs.size()) continue;
    const Rect rect = abs.regions().at(region);
    if (rect.single_cell()) continue;

    // per commanded target: cells with confident high/low success rates
    std::map<int, std::pair<std::vector<Cell>, std::vector<Cell>>> evidence;
    for (const auto& [key, att_succ] : stats.cell_stats()) {
      const auto [cell_idx, target] = key;
      const Cell cell = maze.cell_at(cell_idx);
      if (!rect.contains(cell) || maze.wall(cell)) continue;
      if (att_succ.first < cfg.min_attempts) continue;
      const double rate = static_cast<double>(att_succ.second) / att_succ.first;
      if (rate >= cfg.high_rate) evidence[target].first.push_back(cell);
      else if (rate <= cfg.low_rate) evidence[target].second.push_back(cell);
    }

    SplitChoice best;
    for (const auto& [target, hl] : evidence) {
      const auto& [high, low] = hl;
      if (high.empty() || low.empty()) continue;  // no mixed evidence

      auto evaluate = [&](int dim, int threshold) {
        int hi_lo = 0, hi_hi = 0, lo_lo = 0, lo_hi = 0;
        for (const Cell& c : high)
          ((dim == 0 ? c.row : c.col) < threshold ? hi_lo : hi_hi) += 1;
        for (const Cell& c : low)
          ((dim == 0 ? c.row : c.col) < threshold ? lo_lo : lo_hi) += 1;
        return std::max(hi_lo + lo_hi, hi_hi + lo_lo);
      };
      for (int t = rect.r0 + 1; t <= rect.r1; ++t) {
        const int correct = evaluate(0, t);
        if (correct > best.correct) best = {0, t, correct, target};
      }
      for (int t = rect.c0 + 1; t <= rect.c1; ++t) {
        const int correct = evaluate(1, t);
        if (correct > best.correct) best = {1, t, correct, target};
      }
    }

    if (best.dim >= 0) {
      const int child = abs.split(region, best.dim, best.threshold);
      policies.on_region_split(region, child);
      stats.reset_region(region);
      stats.reset_region(child);
      splits += 1;
    }
  }
  return splits;
}

// ---------------------------------------------------------------------------
// FlatQ

FlatQ::FlatQ(const GridMaze& maze, double gamma, double alpha)
    : gamma_(gamma), alpha_(alpha), q_(static_cast<size_t>(maze.num_cells()) * 4, 0.0) {}

bool FlatQ::run_episode(const GridMaze& maze, int horizon, double eps, Rng& rng,
                        int* steps_out) {
  Cell s = maze.start();
  for (int t = 0; t < horizon; ++t) {
    const int cell = maze.cell_index(s);
    int a = 0;
    if (rng.uniform() < eps) {
      a = rng.uniform_int(4);
    } else {
      double best = q_[cell * 4];
      for (int aa = 1; aa < 4; ++aa)
        if (q_[cell * 4 + aa] > best) {
          best = q_[cell * 4 + aa];
          a = aa;
        }
    }
    const Cell next = maze.step(s, static_cast<Action>(a));
    const int next_cell = maze.cell_index(next);
    const bool done = next == maze.goal();
    double boot = 0.0;
    if (!done) {
      boot = q_[next_cell * 4];
      for (int aa = 1; aa < 4; ++aa) boot = std::max(boot, q_[next_cell * 4 + aa]);
    }
    q_[cell * 4 + a] += alpha_ * ((done ? 1.0 : 0.0) + gamma_ * boot - q_[cell * 4 + a]);
    s = next;
    if (done) {
      if (steps_out) *steps_out = t + 1;
      return true;
    }
  }
  if (steps_out) *steps_out = horizon;
  return false;
}

}  // namespace imol::star
