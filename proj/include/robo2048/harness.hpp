// Copyright 2026 The robo2048 Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "robo2048/arm.hpp"
#include "robo2048/dqn.hpp"
#include "robo2048/dqn_io.hpp"
#include "robo2048/vision.hpp"

namespace robo2048::harness {

inline constexpr const char* kVersion = "robo2048 1.0.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// RunConfig: flat "key = value" settings. '#' starts a comment.

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      // shared
      "seed", "n_games", "stop_exponent", "max_moves",
      // dqn
      "gamma", "batch_size", "replay_capacity", "target_update_period", "learning_rate", "clip_norm",
      "reward_scale", "hidden", "w_monotonicity", "w_smoothness", "w_free_tiles", "w_max_value",
      "heuristic_clip", "win_bonus", "loss_penalty", "step_penalty", "win_exponent", "epsilon_start",
      "epsilon_end", "epsilon_age_period", "epsilon_step", "train_steps", "eval_every", "eval_games",
      "init_seed", "resume", "save_state", "checkpoint",
      // vision
      "digit_checkpoint", "error_rate", "noise_sigma", "max_shift", "max_rotation_deg", "max_brightness",
      "n_boards", "variants", "test_fraction", "aug_rotation_deg", "aug_shift", "digit_epochs",
      "digit_learning_rate", "digit_batch_size", "digit_hidden", "digit_seed", "write_dataset",
      "round_trip_boards",
      // swipes
      "q_state", "q_terminal", "r_control", "ilqr_max_iterations", "alpha0", "alpha_decay",
      "alpha_backoff", "alpha_cap"};
  return keys;
}

class RunConfig {
 public:
  static RunConfig parse(std::istream& is) {
    RunConfig c;
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
      ++n;
      if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      c.set(key, value);
    }
    return c;
  }

  static RunConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static RunConfig load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path);
    return parse(is);
  }

  void set(const std::string& key, const std::string& value) {
    if (!known_keys().count(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    if (!known_keys().count(key)) throw std::logic_error("unregistered key " + key);
    const auto it = values_.find(key);
    T out = fallback;
    if (it != values_.end()) out = convert<T>(key, it->second);
    used_[key] = render(out);
    return out;
  }

  std::string get_string(const std::string& key, const std::string& fallback) { return get<std::string>(key, fallback); }

  /// Settings read so far, with defaults filled in; a valid config file.
  std::string effective_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : used_) os << k << " = " << v << '\n';
    return os.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  template <typename T>
  static T convert(const std::string& key, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw ConfigError(key + ": expected true or false, got '" + v + "'");
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      std::vector<int> out;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(convert<int>(key, trim(item)));
      if (out.empty()) throw ConfigError(key + ": empty list");
      return out;
    } else {
      T out{};
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(key + ": cannot parse '" + v + "'");
      return out;
    }
  }

  template <typename T>
  static std::string render(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      return v ? "true" : "false";
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s;
    } else if constexpr (std::is_floating_point_v<T>) {
      std::ostringstream os;
      os << std::setprecision(17) << v;
      return os.str();
    } else {
      return std::to_string(v);
    }
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> used_;
};

// ---------------------------------------------------------------------------
// Config -> module settings

inline dqn::DqnConfig dqn_config(RunConfig& c) {
  dqn::DqnConfig d;
  d.gamma = c.get("gamma", d.gamma);
  d.batch_size = c.get("batch_size", d.batch_size);
  d.replay_capacity = c.get("replay_capacity", d.replay_capacity);
  d.target_update_period = c.get("target_update_period", d.target_update_period);
  d.learning_rate = c.get("learning_rate", d.learning_rate);
  d.clip_norm = c.get("clip_norm", d.clip_norm);
  d.reward_scale = c.get("reward_scale", d.reward_scale);
  d.hidden = c.get("hidden", d.hidden);
  auto& r = d.reward;
  r.w_monotonicity = c.get("w_monotonicity", r.w_monotonicity);
  r.w_smoothness = c.get("w_smoothness", r.w_smoothness);
  r.w_free_tiles = c.get("w_free_tiles", r.w_free_tiles);
  r.w_max_value = c.get("w_max_value", r.w_max_value);
  r.heuristic_clip = c.get("heuristic_clip", r.heuristic_clip);
  r.win_bonus = c.get("win_bonus", r.win_bonus);
  r.loss_penalty = c.get("loss_penalty", r.loss_penalty);
  r.step_penalty = c.get("step_penalty", r.step_penalty);
  r.win_exponent = c.get("win_exponent", r.win_exponent);
  auto& e = d.epsilon;
  e.start = c.get("epsilon_start", e.start);
  e.end = c.get("epsilon_end", e.end);
  e.age_period = c.get("epsilon_age_period", e.age_period);
  e.step = c.get("epsilon_step", e.step);
  d.train_steps = c.get("train_steps", d.train_steps);
  d.eval_every = c.get("eval_every", d.eval_every);
  d.eval_games = c.get("eval_games", d.eval_games);
  d.init_seed = c.get("init_seed", d.init_seed);
  try {
    d.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  return d;
}

inline vision::RenderOptions render_options(RunConfig& c) {
  vision::RenderOptions r;
  r.noise_sigma = c.get("noise_sigma", r.noise_sigma);
  r.max_shift = c.get("max_shift", r.max_shift);
  r.max_rotation_deg = c.get("max_rotation_deg", r.max_rotation_deg);
  r.max_brightness = c.get("max_brightness", r.max_brightness);
  if (r.noise_sigma < 0 || r.max_shift < 0 || r.max_rotation_deg < 0 || r.max_brightness < 0)
    throw ConfigError("render perturbations must be non-negative");
  return r;
}

inline vision::DatasetOptions dataset_options(RunConfig& c) {
  vision::DatasetOptions d;
  d.render = render_options(c);
  d.variants = c.get("variants", d.variants);
  d.test_fraction = c.get("test_fraction", d.test_fraction);
  d.augment.max_rotation_deg = c.get("aug_rotation_deg", d.augment.max_rotation_deg);
  d.augment.max_shift = c.get("aug_shift", d.augment.max_shift);
  if (d.variants < 1) throw ConfigError("variants must be at least 1");
  if (!(d.test_fraction > 0 && d.test_fraction < 1)) throw ConfigError("test_fraction must be in (0,1)");
  return d;
}

inline vision::ClassifierTraining classifier_training(RunConfig& c) {
  vision::ClassifierTraining t;
  t.epochs = c.get("digit_epochs", t.epochs);
  t.learning_rate = c.get("digit_learning_rate", t.learning_rate);
  t.batch_size = c.get("digit_batch_size", t.batch_size);
  t.hidden = c.get("digit_hidden", t.hidden);
  t.seed = c.get("digit_seed", t.seed);
  if (t.epochs < 0 || t.batch_size < 1 || t.hidden < 1 || !(t.learning_rate > 0))
    throw ConfigError("invalid digit classifier settings");
  return t;
}

inline arm::SwipeCostWeights swipe_weights(RunConfig& c) {
  arm::SwipeCostWeights w;
  w.state = c.get("q_state", w.state);
  w.terminal = c.get("q_terminal", w.terminal);
  w.control = c.get("r_control", w.control);
  if (!(w.state > 0 && w.terminal > 0 && w.control > 0)) throw ConfigError("swipe cost weights must be positive");
  return w;
}

inline lqr::IlqrOptions ilqr_options(RunConfig& c) {
  lqr::IlqrOptions o;
  o.max_iterations = c.get("ilqr_max_iterations", o.max_iterations);
  o.alpha0 = c.get("alpha0", o.alpha0);
  o.alpha_decay = c.get("alpha_decay", o.alpha_decay);
  o.alpha_backoff = c.get("alpha_backoff", o.alpha_backoff);
  o.alpha_cap = c.get("alpha_cap", o.alpha_cap);
  if (o.max_iterations < 1 || o.alpha0 < 0 || o.alpha0 >= 1 || !(o.alpha_decay > 0 && o.alpha_decay < 1) ||
      o.alpha_backoff <= 1 || !(o.alpha_cap > 0 && o.alpha_cap < 1))
    throw ConfigError("invalid iLQR settings");
  return o;
}

// ---------------------------------------------------------------------------
// Output helpers

class Output {
 public:
  explicit Output(std::string dir) : dir_(std::move(dir)) {
    if (dir_.empty()) throw ConfigError("missing output directory");
    std::filesystem::create_directories(dir_);
  }

  std::string path(const std::string& name) const { return (std::filesystem::path(dir_) / name).string(); }

  std::ofstream open(const std::string& name) const {
    std::ofstream os(path(name));
    if (!os) throw std::runtime_error("cannot write " + path(name));
    return os;
  }

  /// Config echo plus seed and version; usable as --config for a rerun.
  void write_manifest(const std::string& command, RunConfig& cfg) const {
    auto os = open("manifest.txt");
    os << "# command: " << command << "\n# version: " << kVersion << '\n' << cfg.effective_text();
  }

 private:
  std::string dir_;
};

inline std::uint64_t seed_of(RunConfig& c) { return c.get<std::uint64_t>("seed", 1); }

inline int n_games_of(RunConfig& c, int fallback) {
  const int n = c.get("n_games", fallback);
  if (n < 1) throw ConfigError("n_games must be at least 1");
  return n;
}

// ---------------------------------------------------------------------------
// Commands

inline dqn::EvalStats cmd_baseline_random(RunConfig& cfg, const Output& out) {
  const auto seed = seed_of(cfg);
  const int n = n_games_of(cfg, 10000);
  dqn::EvalOptions opt;
  opt.stop_exponent = cfg.get("stop_exponent", 0);
  const auto stats = dqn::evaluate_policy(dqn::random_policy(), n, seed, opt);
  auto os = out.open("baseline_random.csv");
  dqn::write_eval_csv(os, stats);
  out.write_manifest("baseline-random", cfg);
  return stats;
}

inline dqn::TrainingStats cmd_train_dqn(RunConfig& cfg, const Output& out) {
  const auto seed = seed_of(cfg);
  const auto d = dqn_config(cfg);
  const std::string resume = cfg.get_string("resume", "");
  const bool save_state = cfg.get("save_state", false);
  dqn::Trainer trainer = resume.empty() ? dqn::Trainer(d, seed) : dqn::load_trainer(d, seed, resume);
  trainer.run(d.train_steps, [](const dqn::Trainer& t) {
    const auto& c = t.stats().checkpoints.back();
    std::cerr << "train-dqn: step " << c.train_step << " reach128 " << c.reach128 << "% reach256 " << c.reach256
              << "%\n";
  });
  nn::save(trainer.network(), out.path("dqn.nnv1"));
  {
    auto os = out.open("training.csv");
    dqn::write_training_csv(os, trainer.stats());
  }
  {
    auto os = out.open("training_checkpoints.csv");
    dqn::write_checkpoints_csv(os, trainer.stats());
  }
  if (save_state) dqn::save_trainer(trainer, out.path("train_state.txt"));
  out.write_manifest("train-dqn", cfg);
  return trainer.stats();
}

inline dqn::QNetwork load_network(RunConfig& cfg, const std::string& key) {
  const std::string path = cfg.get_string(key, "");
  if (path.empty()) throw ConfigError("missing " + key);
  if (!std::filesystem::exists(path)) throw ConfigError(key + " not found: " + path);
  return nn::load<float>(path);
}

inline dqn::EvalStats cmd_eval_dqn(RunConfig& cfg, const Output& out) {
  const auto seed = seed_of(cfg);
  const auto net = load_network(cfg, "checkpoint");
  const int n = n_games_of(cfg, 1000);
  dqn::EvalOptions opt;
  opt.stop_exponent = cfg.get("stop_exponent", 0);
  opt.max_moves = cfg.get("max_moves", opt.max_moves);
  const auto stats = dqn::evaluate(net, n, seed, opt);
  auto os = out.open("eval_dqn.csv");
  dqn::write_eval_csv(os, stats);
  out.write_manifest("eval-dqn", cfg);
  return stats;
}

// --- end-to-end loop ------------------------------------------------------

struct GapReport {
  dqn::EvalStats clean;
  dqn::EvalStats injected;
  long misread_tiles = 0;   // recognition errors before injection
  long read_tiles = 0;
  long wasted_moves = 0;    // actions that did not move the true board
  std::array<long, 4> swipes{};  // executions per direction
  double max_waypoint_residual = 0;

  double rate_difference(int exponent) const { return injected.reach_rate(exponent) - clean.reach_rate(exponent); }
  double moves_difference_pct(int exponent) const {
    const double c = clean.mean_moves_to(exponent);
    return c > 0 ? 100.0 * (injected.mean_moves_to(exponent) - c) / c : 0.0;
  }
};

struct E2eOptions {
  double error_rate = 0.011;
  vision::RenderOptions render;
  int stop_exponent = 8;
  long max_moves = 5000;
};

/// Perception -> policy -> actuation for one game. The policy only sees
/// boards read back from rendered screenshots (with injected errors); its
/// chosen swipe is applied to the true board.
inline dqn::GameRecord play_game_e2e(const dqn::QNetwork& q, const vision::Classifier& digits, Rng& game_rng,
                                     Rng& percept_rng, const E2eOptions& opt, GapReport& log) {
  dqn::GameRecord rec;
  game::Board board = game::new_board(game_rng);
  encoding::History seen;
  const std::uint64_t style = percept_rng.next_u64();
  game::Board last_read = board;
  auto note = [&rec](const game::Board& b) {
    rec.max_tile_exponent = std::max(rec.max_tile_exponent, game::max_tile(b));
    if (rec.moves_to_128 < 0 && rec.max_tile_exponent >= 7) rec.moves_to_128 = rec.moves;
    if (rec.moves_to_256 < 0 && rec.max_tile_exponent >= 8) rec.moves_to_256 = rec.moves;
  };
  note(board);
  while (rec.moves < opt.max_moves && !game::is_terminal(board)) {
    if (opt.stop_exponent > 0 && rec.max_tile_exponent >= opt.stop_exponent) break;
    const vision::Image img = vision::render_board(board, style, percept_rng, opt.render);
    game::Board read = last_read;
    try {
      read = vision::read_board(img, digits);
    } catch (const vision::NoBoardFound&) {
      // keep the previous reading
    }
    last_read = read;
    for (int i = 0; i < game::kCells; ++i) log.misread_tiles += read.cells[i] != board.cells[i];
    log.read_tiles += game::kCells;
    const game::Board perceived = vision::inject_misclassification(read, opt.error_rate, percept_rng);
    game::ActionSet legal = game::legal_actions(perceived);
    if (legal.empty()) legal.bits = 0xF;
    const Eigen::VectorXf qv = nn::forward(q, dqn::dense_input(encoding::encode_input(perceived, seen)));
    const game::Action a = dqn::greedy_action(std::span<const float>(qv.data(), 4), legal);
    ++log.swipes[static_cast<std::size_t>(arm::swipe_for(a))];
    const game::Transition t = game::step(board, a, game_rng);
    if (!t.moved) ++log.wasted_moves;
    seen.push(perceived, a);
    board = t.after_spawn;
    ++rec.moves;
    note(board);
  }
  return rec;
}

/// Clean greedy evaluation and the perception loop on the same game seeds.
inline GapReport run_gap_study(const dqn::QNetwork& q, const vision::Classifier& digits, int n_games,
                               std::uint64_t seed, const E2eOptions& opt) {
  if (n_games < 1) throw std::invalid_argument("n_games must be at least 1");
  GapReport rep;
  rep.clean = dqn::evaluate(q, n_games, seed, dqn::EvalOptions{opt.stop_exponent, opt.max_moves});
  for (int i = 0; i < n_games; ++i) {
    Rng game_rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    Rng percept_rng(derive_seed(seed ^ 0xe2e0e2e0e2e0e2e0ULL, static_cast<std::uint64_t>(i)));
    rep.injected.games.push_back(play_game_e2e(q, digits, game_rng, percept_rng, opt, rep));
  }
  return rep;
}

inline void write_gap_report(std::ostream& os, const GapReport& r) {
  os << "# robo2048 gap v1\n";
  os << "target,clean_win_pct,injected_win_pct,difference_pp,clean_moves,injected_moves,difference_pct\n";
  os << std::setprecision(9);
  for (int e : {7, 8})
    os << (1 << e) << ',' << r.clean.reach_rate(e) << ',' << r.injected.reach_rate(e) << ',' << r.rate_difference(e)
       << ',' << r.clean.mean_moves_to(e) << ',' << r.injected.mean_moves_to(e) << ',' << r.moves_difference_pct(e)
       << '\n';
  os << "# perception and actuation\n";
  os << "misread_tiles,read_tiles,wasted_moves,swipes_left,swipes_right,swipes_backward,swipes_forward,"
        "max_waypoint_residual_rad\n";
  os << r.misread_tiles << ',' << r.read_tiles << ',' << r.wasted_moves << ',' << r.swipes[0] << ',' << r.swipes[1]
     << ',' << r.swipes[2] << ',' << r.swipes[3] << ',' << r.max_waypoint_residual << '\n';
  os << "# decisions are affected by recognition errors only; actuation contributes the logged swipe residuals\n";
}

inline void write_swipe_summary(std::ostream& os, const std::vector<arm::Swipe>& swipes) {
  os << "# robo2048 swipes v1\n";
  os << "direction,iterations,rejected,initial_cost,final_cost,max_waypoint_residual_rad,contact_first,contact_last,"
        "contact_steps,contiguous\n";
  os << std::setprecision(9);
  for (const auto& s : swipes) {
    const auto c = arm::contact_points(s.trajectory, s.spec.surface_z);
    const auto r = s.waypoint_residuals();
    os << arm::swipe_name(s.spec.direction) << ',' << s.result.iterations << ',' << s.result.rejected << ','
       << s.result.accepted_costs.front() << ',' << s.result.accepted_costs.back() << ','
       << *std::max_element(r.begin(), r.end()) << ',' << (c.empty() ? -1 : c.front().t) << ','
       << (c.empty() ? -1 : c.back().t) << ',' << c.size() << ',' << arm::is_contiguous(c) << '\n';
  }
}

inline std::vector<arm::Swipe> optimize_all_swipes(RunConfig& cfg) {
  const auto w = swipe_weights(cfg);
  const auto o = ilqr_options(cfg);
  std::vector<arm::Swipe> out;
  for (auto d : arm::kAllSwipes) out.push_back(arm::swipe_trajectory(d, w, o));
  return out;
}

inline std::vector<arm::Swipe> cmd_optimize_swipes(RunConfig& cfg, const Output& out) {
  auto swipes = optimize_all_swipes(cfg);
  for (const auto& s : swipes) {
    auto os = out.open(std::string("swipe_") + arm::swipe_name(s.spec.direction) + ".csv");
    arm::write_trajectory_csv(os, s.trajectory, s.spec.surface_z);
  }
  auto os = out.open("swipes_summary.csv");
  write_swipe_summary(os, swipes);
  out.write_manifest("optimize-swipes", cfg);
  return swipes;
}

inline GapReport cmd_play_e2e(RunConfig& cfg, const Output& out) {
  const auto seed = seed_of(cfg);
  const auto q = load_network(cfg, "checkpoint");
  const auto digits = load_network(cfg, "digit_checkpoint");
  if (digits.in_dim() != vision::kTileSize * vision::kTileSize || digits.out_dim() != vision::kClasses)
    throw ConfigError("digit_checkpoint is not a 1024-input 12-class network");
  if (q.in_dim() != static_cast<Eigen::Index>(encoding::kInputSize) || q.out_dim() != 4)
    throw ConfigError("checkpoint is not a Q-network");
  E2eOptions opt;
  opt.error_rate = cfg.get("error_rate", opt.error_rate);
  if (!(opt.error_rate >= 0 && opt.error_rate <= 1)) throw ConfigError("error_rate must be in [0,1]");
  opt.render = render_options(cfg);
  opt.stop_exponent = cfg.get("stop_exponent", opt.stop_exponent);
  opt.max_moves = cfg.get("max_moves", opt.max_moves);
  const int n = n_games_of(cfg, 1000);

  const auto swipes = optimize_all_swipes(cfg);
  GapReport rep = run_gap_study(q, digits, n, seed, opt);
  for (const auto& s : swipes) {
    const auto r = s.waypoint_residuals();
    rep.max_waypoint_residual = std::max(rep.max_waypoint_residual, *std::max_element(r.begin(), r.end()));
  }
  {
    auto os = out.open("gap_report.csv");
    write_gap_report(os, rep);
  }
  {
    auto os = out.open("e2e_games.csv");
    dqn::write_eval_csv(os, rep.injected);
  }
  {
    auto os = out.open("swipes_summary.csv");
    write_swipe_summary(os, swipes);
  }
  out.write_manifest("play-e2e", cfg);
  return rep;
}

// --- digits ---------------------------------------------------------------

inline vision::Dataset dataset_from_config(RunConfig& cfg) {
  const int n_boards = cfg.get("n_boards", 877);
  if (n_boards < 1) throw ConfigError("n_boards must be at least 1");
  const auto opt = dataset_options(cfg);
  Rng rng(derive_seed(seed_of(cfg), 0xda7aULL));
  return vision::build_dataset(n_boards, rng, opt);
}

inline void write_confusion(std::ostream& os, const vision::Confusion& cm) {
  os << "truth\\predicted";
  for (int k = 0; k < vision::kClasses; ++k) os << ',' << k;
  os << '\n';
  for (int t = 0; t < vision::kClasses; ++t) {
    os << t;
    for (int k = 0; k < vision::kClasses; ++k) os << ',' << cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
    os << '\n';
  }
}

struct DigitReport {
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  int source_tiles = 0;
  std::vector<double> epoch_loss;
  vision::Confusion confusion;
  double round_trip_rate = -1;  // fraction of boards read back exactly
};

inline DigitReport cmd_train_digits(RunConfig& cfg, const Output& out) {
  const auto ds = dataset_from_config(cfg);
  const auto tc = classifier_training(cfg);
  if (cfg.get("write_dataset", false)) {
    std::filesystem::create_directories(out.path("dataset"));
    vision::write_dataset(ds, out.path("dataset"));
  }
  DigitReport rep;
  vision::ClassifierReport cr;
  const auto net = vision::train_classifier(ds, tc, &cr);
  rep.train_samples = ds.count(false);
  rep.test_samples = ds.count(true);
  rep.source_tiles = ds.source_tiles;
  rep.epoch_loss = cr.epoch_loss;
  rep.confusion = vision::evaluate_classifier(net, ds, true);
  nn::save(net, out.path("digits.nnv1"));
  auto os = out.open("digits_train.csv");
  os << "# robo2048 digits-train v1\nsource_tiles,train_samples,test_samples,test_accuracy\n" << std::setprecision(9)
     << rep.source_tiles << ',' << rep.train_samples << ',' << rep.test_samples << ',' << rep.confusion.accuracy()
     << "\n# epoch losses\nepoch,mean_cross_entropy\n";
  for (std::size_t i = 0; i < rep.epoch_loss.size(); ++i) os << i << ',' << rep.epoch_loss[i] << '\n';
  os << "# confusion (held-out)\n";
  write_confusion(os, rep.confusion);
  out.write_manifest("train-digits", cfg);
  return rep;
}

/// Fraction of random boards whose render is read back exactly.
inline double round_trip_rate(const vision::Classifier& net, int n_boards, std::uint64_t seed,
                              const vision::RenderOptions& render) {
  Rng rng(seed);
  int ok = 0;
  for (int i = 0; i < n_boards; ++i) {
    const game::Board b = vision::random_class_board(rng);
    const auto img = vision::render_board(b, rng.next_u64(), rng, render);
    try {
      ok += vision::read_board(img, net) == b;
    } catch (const vision::NoBoardFound&) {
    }
  }
  return n_boards ? double(ok) / n_boards : 0.0;
}

inline DigitReport cmd_eval_digits(RunConfig& cfg, const Output& out) {
  const auto net = load_network(cfg, "digit_checkpoint");
  const auto ds = dataset_from_config(cfg);
  DigitReport rep;
  rep.train_samples = ds.count(false);
  rep.test_samples = ds.count(true);
  rep.source_tiles = ds.source_tiles;
  rep.confusion = vision::evaluate_classifier(net, ds, true);
  const int boards = cfg.get("round_trip_boards", 1000);
  if (boards < 0) throw ConfigError("round_trip_boards must be non-negative");
  rep.round_trip_rate = round_trip_rate(net, boards, derive_seed(seed_of(cfg), 0x7219ULL), render_options(cfg));
  auto os = out.open("digits_eval.csv");
  os << "# robo2048 digits-eval v1\ntest_samples,test_accuracy,round_trip_boards,round_trip_rate\n"
     << std::setprecision(9) << rep.test_samples << ',' << rep.confusion.accuracy() << ',' << boards << ','
     << rep.round_trip_rate << "\n# confusion (held-out)\n";
  write_confusion(os, rep.confusion);
  out.write_manifest("eval-digits", cfg);
  return rep;
}

}  // namespace robo2048::harness
