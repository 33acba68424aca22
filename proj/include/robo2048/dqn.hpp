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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "robo2048/encoding.hpp"
#include "robo2048/game.hpp"
#include "robo2048/nn.hpp"
#include "robo2048/rng.hpp"

namespace robo2048::dqn {

using game::Action;
using game::ActionSet;
using game::Board;
using encoding::InputVector;

using QNetwork = nn::Network<float>;
using QSnapshot = nn::ParameterSnapshot<float>;

// ---------------------------------------------------------------------------
// Heuristics. All work on exponents; only adjacent non-empty pairs count.

struct HeuristicScores {
  double monotonicity = 0;
  double smoothness = 0;
  double free_tiles = 0;
  double max_value = 0;
};

namespace detail {

inline std::array<std::uint8_t, 4> board_line(const Board& b, int k) {
  // k in [0,4): rows, k in [4,8): columns.
  std::array<std::uint8_t, 4> l{};
  for (int i = 0; i < 4; ++i) l[i] = k < 4 ? b.at(k, i) : b.at(i, k - 4);
  return l;
}

}  // namespace detail

/// Sum over rows and columns of max(increasing score, decreasing score),
/// where each score is minus the total exponent step against that direction.
/// 0 is a perfectly monotone board.
inline double heuristic_monotonicity(const Board& b) {
  double total = 0;
  for (int k = 0; k < 8; ++k) {
    const auto l = detail::board_line(b, k);
    double inc = 0, dec = 0;
    for (int i = 0; i + 1 < 4; ++i) {
      if (l[i] == 0 || l[i + 1] == 0) continue;
      const int d = int(l[i + 1]) - int(l[i]);
      if (d < 0) inc += d;
      else dec -= d;
    }
    total += std::max(inc, dec);
  }
  return total;
}

inline double heuristic_smoothness(const Board& b) {
  double s = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      const int v = b.at(r, c);
      if (v == 0) continue;
      if (c + 1 < 4 && b.at(r, c + 1)) s -= std::abs(v - int(b.at(r, c + 1)));
      if (r + 1 < 4 && b.at(r + 1, c)) s -= std::abs(v - int(b.at(r + 1, c)));
    }
  return s;
}

inline double heuristic_free_tiles(const Board& b) { return game::count_empty(b); }

inline double heuristic_max_value(const Board& b) { return game::max_tile(b); }

inline HeuristicScores heuristics(const Board& b) {
  return {heuristic_monotonicity(b), heuristic_smoothness(b), heuristic_free_tiles(b),
          heuristic_max_value(b)};
}

// ---------------------------------------------------------------------------
// Configuration

struct RewardConfig {
  double w_monotonicity = 1.0;
  double w_smoothness = 0.1;
  double w_free_tiles = 2.7;
  double w_max_value = 1.0;
  double heuristic_clip = 50.0;  // bound on |weighted heuristic delta| per step
  double win_bonus = 1000.0;
  double loss_penalty = 200.0;
  double step_penalty = 0.1;
  int win_exponent = 8;
};

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  long age_period = 2000;
  double step = 0.05;  // decrease per age
};

struct DqnConfig {
  double gamma = 0.95;
  int batch_size = 16;
  std::size_t replay_capacity = 30000;
  long target_update_period = 1000;
  double learning_rate = 1e-3;
  double clip_norm = 10.0;
  double reward_scale = 0.01;  // rewards are multiplied by this before storage
  std::vector<int> hidden{500, 500, 500};
  RewardConfig reward;
  EpsilonSchedule epsilon;
  long train_steps = 500000;
  long eval_every = 25000;
  int eval_games = 100;
  std::uint64_t init_seed = 1;

  void validate() const {
    if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("gamma must be in (0,1)");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (replay_capacity < static_cast<std::size_t>(batch_size))
      throw std::invalid_argument("replay_capacity must be at least batch_size");
    if (target_update_period <= 0) throw std::invalid_argument("target_update_period must be positive");
    if (!(learning_rate >= 0)) throw std::invalid_argument("learning_rate must be non-negative");
    if (clip_norm < 0) throw std::invalid_argument("clip_norm must be non-negative");
    if (!(reward_scale > 0)) throw std::invalid_argument("reward_scale must be positive");
    if (hidden.empty()) throw std::invalid_argument("need at least one hidden layer");
    for (int h : hidden)
      if (h <= 0) throw std::invalid_argument("hidden sizes must be positive");
    if (train_steps < 0) throw std::invalid_argument("train_steps must be non-negative");
    if (eval_every < 0 || eval_games < 0) throw std::invalid_argument("eval settings must be non-negative");
    const auto& r = reward;
    if (r.win_exponent < 1 || r.win_exponent > game::kMaxExponent)
      throw std::invalid_argument("win_exponent out of range");
    if (r.heuristic_clip <= 0 || r.win_bonus <= 0 || r.loss_penalty < 0 || r.step_penalty < 0)
      throw std::invalid_argument("reward magnitudes must be positive");
    if (r.win_bonus < 10 * r.heuristic_clip)
      throw std::invalid_argument("win_bonus must be at least 10x heuristic_clip");
    const auto& e = epsilon;
    if (!(e.end > 0 && e.end <= e.start && e.start <= 1) || e.age_period <= 0 || e.step <= 0)
      throw std::invalid_argument("invalid epsilon schedule");
  }

  std::vector<int> layer_sizes() const {
    std::vector<int> s{static_cast<int>(encoding::kInputSize)};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(4);
    return s;
  }
};

// ---------------------------------------------------------------------------
// Reward

/// Weighted heuristic delta, clipped to +-heuristic_clip.
inline double heuristic_component(const game::Transition& t, const RewardConfig& cfg) {
  const HeuristicScores a = heuristics(t.before);
  const HeuristicScores b = heuristics(t.after_spawn);
  const double raw = cfg.w_monotonicity * (b.monotonicity - a.monotonicity) +
                     cfg.w_smoothness * (b.smoothness - a.smoothness) +
                     cfg.w_free_tiles * (b.free_tiles - a.free_tiles) +
                     cfg.w_max_value * (b.max_value - a.max_value);
  return std::clamp(raw, -cfg.heuristic_clip, cfg.heuristic_clip);
}

/// Shaped reward of one move. A terminal board that never reached the win
/// exponent scores exactly -(loss_penalty + step_penalty).
inline double shaped_reward(const game::Transition& t, const RewardConfig& cfg) {
  const int before_max = game::max_tile(t.before);
  const int after_max = game::max_tile(t.after_spawn);
  if (t.terminal && after_max < cfg.win_exponent) return -cfg.loss_penalty - cfg.step_penalty;
  double r = heuristic_component(t, cfg) - cfg.step_penalty;
  if (before_max < cfg.win_exponent && after_max >= cfg.win_exponent) r += cfg.win_bonus;
  return r;
}

// ---------------------------------------------------------------------------
// Exploration

/// max(end, start - step * floor(iteration / age_period)).
inline double epsilon_at(long iteration, const EpsilonSchedule& s = {}) {
  if (iteration < 0) throw std::invalid_argument("epsilon_at: negative iteration");
  const long age = iteration / s.age_period;
  return std::max(s.end, s.start - s.step * static_cast<double>(age));
}

inline Eigen::VectorXf dense_input(const InputVector& in) {
  Eigen::VectorXf v(encoding::kInputSize);
  encoding::to_dense(in, v.data());
  return v;
}

/// Highest-valued legal action, ties to the lowest action code.
inline Action greedy_action(std::span<const float> q, ActionSet legal) {
  if (legal.empty()) throw std::invalid_argument("no legal action");
  int best = -1;
  for (int a = 0; a < 4; ++a) {
    if (!legal.contains(game::action_from_code(a))) continue;
    if (best < 0 || q[a] > q[best]) best = a;
  }
  return game::action_from_code(best);
}

inline Action uniform_legal(ActionSet legal, Rng& rng) {
  if (legal.empty()) throw std::invalid_argument("no legal action");
  const auto v = legal.to_vector();
  return v[rng.uniform_index(v.size())];
}

/// Epsilon-greedy over the legal actions. Always consumes one uniform draw,
/// plus one more when exploring.
inline Action select_action(const QNetwork& net, const InputVector& input, ActionSet legal,
                            double epsilon, Rng& rng) {
  if (legal.empty()) throw std::invalid_argument("select_action: empty legal set");
  if (rng.uniform() < epsilon) return uniform_legal(legal, rng);
  const Eigen::VectorXf q = nn::forward(net, dense_input(input));
  return greedy_action(std::span<const float>(q.data(), 4), legal);
}

// ---------------------------------------------------------------------------
// Replay

struct Experience {
  InputVector input;
  Action action = Action::Up;
  float reward = 0;
  InputVector next_input;
  ActionSet next_legal;  // empty when the next state is terminal
  bool terminal = false;
};

/// Fixed-capacity ring; once full, each push overwrites the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 30000) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(const Experience& e) {
    if (data_.size() < capacity_) data_.push_back(e);
    else data_[cursor_] = e;
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t cursor() const { return cursor_; }
  const Experience& operator[](std::size_t i) const { return data_[i]; }

  /// Uniform indices with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (data_.empty()) throw std::logic_error("sample from empty replay buffer");
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = rng.uniform_index(data_.size());
    return idx;
  }

  void restore(std::vector<Experience> data, std::size_t cursor) {
    if (data.size() > capacity_ || cursor >= capacity_) throw std::invalid_argument("replay restore");
    data_ = std::move(data);
    cursor_ = cursor;
  }

 private:
  std::size_t capacity_;
  std::vector<Experience> data_;
  std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Learning

/// r for terminal samples, otherwise r + gamma * max over legal a' of Q(s', a'; w-).
inline std::vector<double> td_targets(std::span<const Experience* const> batch, const QSnapshot& target,
                                      double gamma) {
  if (batch.empty()) throw std::invalid_argument("td_targets: empty minibatch");
  Eigen::MatrixXf next(encoding::kInputSize, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) encoding::to_dense(batch[j]->next_input, next.col(j).data());
  const Eigen::MatrixXf q = nn::forward(target.network, next);
  std::vector<double> y(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Experience& e = *batch[j];
    y[j] = e.reward;
    if (e.terminal || e.next_legal.empty()) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < 4; ++a)
      if (e.next_legal.contains(game::action_from_code(a))) best = std::max(best, double(q(a, j)));
    y[j] += gamma * best;
  }
  return y;
}

/// Mean squared TD error of `batch` and one SGD step on `online`.
inline double fit_minibatch(QNetwork& online, const QSnapshot& target,
                            std::span<const Experience* const> batch, const DqnConfig& cfg) {
  const auto y = td_targets(batch, target, cfg.gamma);
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXf in(encoding::kInputSize, n);
  for (Eigen::Index j = 0; j < n; ++j) encoding::to_dense(batch[j]->input, in.col(j).data());
  nn::ForwardCache<float> cache;
  const Eigen::MatrixXf q = nn::forward(online, in, &cache);
  Eigen::MatrixXf grad = Eigen::MatrixXf::Zero(q.rows(), n);
  double loss = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int a = game::code(batch[j]->action);
    const double err = double(q(a, j)) - y[j];
    loss += err * err;
    grad(a, j) = static_cast<float>(2.0 * err / double(n));
  }
  loss /= double(n);
  if (cfg.learning_rate > 0) {
    const auto g = nn::backward(online, cache, grad);
    nn::sgd_step(online, g, nn::SgdOptions{cfg.learning_rate, cfg.clip_norm});
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Evaluation

struct GameRecord {
  long moves = 0;
  int max_tile_exponent = 0;
  long moves_to_128 = -1;  // -1 when never reached
  long moves_to_256 = -1;
  double mean_loss = 0;  // training rows only
};

struct EvalStats {
  std::vector<GameRecord> games;

  std::size_t n() const { return games.size(); }
  double reach_rate(int exponent) const {
    if (games.empty()) return 0;
    std::size_t k = 0;
    for (const auto& g : games) k += g.max_tile_exponent >= exponent;
    return 100.0 * double(k) / double(games.size());
  }
  /// Mean number of moves to first reach `exponent`, over games that reached it.
  double mean_moves_to(int exponent) const {
    double s = 0;
    std::size_t k = 0;
    for (const auto& g : games) {
      const long m = exponent == 7 ? g.moves_to_128 : exponent == 8 ? g.moves_to_256 : -1;
      if (m >= 0) {
        s += double(m);
        ++k;
      }
    }
    return k ? s / double(k) : 0.0;
  }
  double mean_moves() const {
    if (games.empty()) return 0;
    double s = 0;
    for (const auto& g : games) s += double(g.moves);
    return s / double(games.size());
  }
};

struct EvalOptions {
  /// End a game once this exponent is on the board (0 plays to the end).
  int stop_exponent = 0;
  long max_moves = 100000;
};

/// Observation of one step, handed to a policy.
struct PolicyInput {
  const Board& board;
  const encoding::History& history;
};

/// Plays one game with `policy(board, history, rng) -> Action`. The policy
/// may see a different board than the true one; the returned action is
/// applied to the true board.
template <typename Policy>
GameRecord play_game(Policy&& policy, Rng& rng, const EvalOptions& opt = {}) {
  GameRecord rec;
  Board board = game::new_board(rng);
  encoding::History history;
  auto note = [&rec](const Board& b) {
    rec.max_tile_exponent = std::max(rec.max_tile_exponent, game::max_tile(b));
    if (rec.moves_to_128 < 0 && rec.max_tile_exponent >= 7) rec.moves_to_128 = rec.moves;
    if (rec.moves_to_256 < 0 && rec.max_tile_exponent >= 8) rec.moves_to_256 = rec.moves;
  };
  note(board);
  while (rec.moves < opt.max_moves && !game::is_terminal(board)) {
    if (opt.stop_exponent > 0 && rec.max_tile_exponent >= opt.stop_exponent) break;
    const Action a = policy(board, history, rng);
    const game::Transition t = game::step(board, a, rng);
    history.push(board, a);
    board = t.after_spawn;
    ++rec.moves;
    note(board);
  }
  return rec;
}

/// Runs n games; game i uses its own stream seeded by derive_seed(seed, i).
template <typename Policy>
EvalStats evaluate_policy(Policy&& policy, int n_games, std::uint64_t seed, const EvalOptions& opt = {}) {
  if (n_games < 1) throw std::invalid_argument("evaluate: n_games must be at least 1");
  EvalStats stats;
  stats.games.reserve(static_cast<std::size_t>(n_games));
  for (int i = 0; i < n_games; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    stats.games.push_back(play_game(policy, rng, opt));
  }
  return stats;
}

inline auto random_policy() {
  return [](const Board& b, const encoding::History&, Rng& rng) {
    return uniform_legal(game::legal_actions(b), rng);
  };
}

/// Greedy legal-masked policy of a Q-network (epsilon = 0, no RNG use).
inline auto greedy_policy(const QNetwork& net) {
  return [&net](const Board& b, const encoding::History& h, Rng&) {
    const Eigen::VectorXf q = nn::forward(net, dense_input(encoding::encode_input(b, h)));
    return greedy_action(std::span<const float>(q.data(), 4), game::legal_actions(b));
  };
}

inline EvalStats evaluate(const QNetwork& net, int n_games, std::uint64_t seed, const EvalOptions& opt = {}) {
  return evaluate_policy(greedy_policy(net), n_games, seed, opt);
}

// ---------------------------------------------------------------------------
// Training

struct EvalPoint {
  long train_step = 0;
  double reach128 = 0;
  double reach256 = 0;
  double mean_moves = 0;
};

struct TrainingStats {
  std::vector<GameRecord> episodes;
  std::vector<double> loss_curve;  // mean loss over each block of 1000 train steps
  std::vector<EvalPoint> checkpoints;
};

/// Self-play DQN trainer. Each move: encode, select, step, reward, store,
/// then one minibatch update once the buffer holds a full batch.
class Trainer {
 public:
  explicit Trainer(DqnConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), rng_(seed), replay_(cfg_.replay_capacity) {
    cfg_.validate();
    online_ = nn::init_network<float>(cfg_.layer_sizes(), cfg_.init_seed);
    target_ = nn::snapshot(online_);
  }

  const DqnConfig& config() const { return cfg_; }
  const QNetwork& network() const { return online_; }
  const QSnapshot& target() const { return target_; }
  const ReplayBuffer& replay() const { return replay_; }
  const TrainingStats& stats() const { return stats_; }
  long train_steps() const { return train_steps_; }
  long iterations() const { return iterations_; }

  /// Pushes one experience without learning (used by tests and fixtures).
  void remember(const Experience& e) { replay_.push(e); }

  /// One minibatch update. Refreshes the target every target_update_period steps.
  double train_step() {
    if (replay_.size() < static_cast<std::size_t>(cfg_.batch_size))
      throw std::logic_error("train_step: replay buffer holds fewer than batch_size experiences");
    const auto idx = replay_.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng_);
    std::vector<const Experience*> batch;
    batch.reserve(idx.size());
    for (auto i : idx) batch.push_back(&replay_[i]);
    const double loss = fit_minibatch(online_, target_, batch, cfg_);
    ++train_steps_;
    if (train_steps_ % cfg_.target_update_period == 0) target_ = nn::snapshot(online_);
    loss_block_ += loss;
    if (train_steps_ % 1000 == 0) {
      stats_.loss_curve.push_back(loss_block_ / 1000.0);
      loss_block_ = 0;
    }
    episode_loss_ += loss;
    ++episode_updates_;
    return loss;
  }

  /// Plays and learns until `budget` train steps have been taken in total.
  void run(long budget, const std::function<void(const Trainer&)>& on_checkpoint = {}) {
    while (train_steps_ < budget) {
      if (!in_episode_) begin_episode();
      const InputVector input = encoding::encode_input(board_, history_);
      const ActionSet legal = game::legal_actions(board_);
      const double eps = epsilon_at(iterations_, cfg_.epsilon);
      const Action a = select_action(online_, input, legal, eps, rng_);
      const game::Transition t = game::step(board_, a, rng_);
      const double r = shaped_reward(t, cfg_.reward);
      history_.push(board_, a);
      board_ = t.after_spawn;
      ++episode_.moves;
      track(board_);

      Experience e;
      e.input = input;
      e.action = a;
      e.reward = static_cast<float>(r * cfg_.reward_scale);
      e.next_input = encoding::encode_input(board_, history_);
      e.terminal = t.terminal;
      e.next_legal = t.terminal ? ActionSet{} : game::legal_actions(board_);
      replay_.push(e);
      ++iterations_;

      if (replay_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
        train_step();
        if (cfg_.eval_every > 0 && cfg_.eval_games > 0 && train_steps_ % cfg_.eval_every == 0) {
          const EvalStats ev = evaluate(online_, cfg_.eval_games, derive_seed(cfg_.init_seed, 0x5eed0000ULL + train_steps_),
                                        EvalOptions{8, 100000});
          stats_.checkpoints.push_back({train_steps_, ev.reach_rate(7), ev.reach_rate(8), ev.mean_moves_to(7)});
          if (on_checkpoint) on_checkpoint(*this);
        }
      }
      if (t.terminal) end_episode();
    }
  }

  // Serialization of the full training state lives in dqn_io.hpp.
  friend struct TrainerState;

 private:
  void begin_episode() {
    board_ = game::new_board(rng_);
    history_.clear();
    episode_ = GameRecord{};
    episode_loss_ = 0;
    episode_updates_ = 0;
    track(board_);
    in_episode_ = true;
  }

  void end_episode() {
    episode_.mean_loss = episode_updates_ ? episode_loss_ / double(episode_updates_) : 0.0;
    stats_.episodes.push_back(episode_);
    in_episode_ = false;
  }

  void track(const Board& b) {
    episode_.max_tile_exponent = std::max(episode_.max_tile_exponent, game::max_tile(b));
    if (episode_.moves_to_128 < 0 && episode_.max_tile_exponent >= 7) episode_.moves_to_128 = episode_.moves;
    if (episode_.moves_to_256 < 0 && episode_.max_tile_exponent >= 8) episode_.moves_to_256 = episode_.moves;
  }

  DqnConfig cfg_;
  Rng rng_;
  QNetwork online_;
  QSnapshot target_;
  ReplayBuffer replay_;
  TrainingStats stats_;
  long train_steps_ = 0;
  long iterations_ = 0;
  double loss_block_ = 0;

  bool in_episode_ = false;
  Board board_;
  encoding::History history_;
  GameRecord episode_;
  double episode_loss_ = 0;
  long episode_updates_ = 0;
};

struct TrainResult {
  QNetwork network;
  TrainingStats stats;
};

inline TrainResult train(const DqnConfig& cfg, std::uint64_t seed) {
  Trainer t(cfg, seed);
  t.run(cfg.train_steps);
  return {t.network(), t.stats()};
}

}  // namespace robo2048::dqn
