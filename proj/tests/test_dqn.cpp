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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "robo2048/dqn.hpp"
#include "robo2048/dqn_io.hpp"

using namespace robo2048;
using namespace robo2048::dqn;
using game::Action;
using game::Board;
using game::parse_board;
using nn::init_network;

namespace {

DqnConfig small_config() {
  DqnConfig c;
  c.hidden = {16};
  c.replay_capacity = 500;
  c.target_update_period = 50;
  c.eval_every = 0;
  c.train_steps = 300;
  c.epsilon.age_period = 100;
  return c;
}

Board random_board(Rng& rng) {
  Board b;
  for (auto& c : b.cells) c = static_cast<std::uint8_t>(rng.bernoulli(0.3) ? 0 : rng.uniform_index(11) + 1);
  return b;
}

Experience random_experience(Rng& rng, bool terminal) {
  Experience e;
  encoding::History h;
  h.push(random_board(rng), Action::Left);
  e.input = encoding::encode_input(random_board(rng), h);
  e.next_input = encoding::encode_input(random_board(rng), h);
  e.action = game::action_from_code(static_cast<int>(rng.uniform_index(4)));
  e.reward = static_cast<float>(rng.uniform(-1, 1));
  e.terminal = terminal;
  e.next_legal.bits = terminal ? 0 : 0xF;
  return e;
}

}  // namespace

TEST(Heuristics, Monotonicity) {
  EXPECT_EQ(heuristic_monotonicity(Board{}), 0.0);
  // 8 4 2 _ : decreasing row, single-tile columns
  EXPECT_EQ(heuristic_monotonicity(parse_board("3 2 1 .\n. . . .\n. . . .\n. . . .\n")), 0.0);
  // 2 8 2 _ : rise of 2 then drop of 2, best direction still pays 2
  EXPECT_EQ(heuristic_monotonicity(parse_board("1 3 1 .\n. . . .\n. . . .\n. . . .\n")), -2.0);
  // empty cells break pairs: 8 _ 2 4 counts only (2,4)
  EXPECT_EQ(heuristic_monotonicity(parse_board("3 . 1 2\n. . . .\n. . . .\n. . . .\n")), 0.0);
}

TEST(Heuristics, Smoothness) {
  EXPECT_EQ(heuristic_smoothness(Board{}), 0.0);
  EXPECT_EQ(heuristic_smoothness(parse_board("2 2 . .\n. . . .\n. . . .\n. . . .\n")), 0.0);
  EXPECT_EQ(heuristic_smoothness(parse_board("1 8 . .\n. . . .\n. . . .\n. . . .\n")), -7.0);
  EXPECT_EQ(heuristic_smoothness(parse_board("1 . 8 .\n. . . .\n. . . .\n. . . .\n")), 0.0);
}

TEST(Heuristics, FreeTilesAndMax) {
  EXPECT_EQ(heuristic_free_tiles(Board{}), 16.0);
  Board full;
  full.cells.fill(1);
  EXPECT_EQ(heuristic_free_tiles(full), 0.0);
  const Board fig_right = parse_board(". . . 1\n. . . .\n. . 1 2\n1 . . 3\n");
  EXPECT_EQ(heuristic_free_tiles(fig_right), 11.0);
  EXPECT_EQ(heuristic_max_value(fig_right), 3.0);
  EXPECT_EQ(heuristic_max_value(Board{}), 0.0);
}

TEST(HeuristicsProperty, Ranges) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto h = heuristics(random_board(rng));
    EXPECT_GE(h.free_tiles, 0);
    EXPECT_LE(h.free_tiles, 16);
    EXPECT_GE(h.max_value, 0);
    EXPECT_LE(h.max_value, 11);
    EXPECT_LE(h.monotonicity, 0);
    EXPECT_LE(h.smoothness, 0);
  }
}

TEST(Reward, NoOpGetsStepPenaltyOnly) {
  const RewardConfig cfg;
  const Board b = parse_board("1 . . .\n2 . . .\n. . . .\n. . . .\n");
  const auto t = game::step_with(b, Action::Left, [](const Board& x) { return x; });
  ASSERT_FALSE(t.moved);
  EXPECT_EQ(heuristic_component(t, cfg), 0.0);
  EXPECT_DOUBLE_EQ(shaped_reward(t, cfg), -cfg.step_penalty);
}

TEST(Reward, WinBonusOnFirstGoalTile) {
  RewardConfig cfg;
  cfg.win_exponent = 7;
  const Board b = parse_board("6 6 . .\n. . . .\n. . . .\n. . . .\n");
  const auto t = game::step_with(b, Action::Left, [](Board x) {
    x.cells[15] = 1;
    return x;
  });
  EXPECT_GE(shaped_reward(t, cfg), cfg.win_bonus - cfg.heuristic_clip - cfg.step_penalty);
  // already past the goal: no second bonus
  const Board past = parse_board("7 6 6 .\n. . . .\n. . . .\n. . . .\n");
  const auto t2 = game::step_with(past, Action::Right, [](Board x) {
    x.cells[15] = 1;
    return x;
  });
  EXPECT_LT(shaped_reward(t2, cfg), cfg.win_bonus / 2);
}

TEST(Reward, TerminalLoss) {
  const RewardConfig cfg;
  // sliding the last row left and filling the gap leaves no merge anywhere
  const Board b = parse_board("1 2 1 2\n2 1 2 1\n1 2 1 2\n. 3 4 5\n");
  const auto t = game::step_with(b, Action::Left, [](Board x) {
    x.cells[15] = 6;
    return x;
  });
  ASSERT_TRUE(t.terminal);
  EXPECT_LE(shaped_reward(t, cfg), -cfg.loss_penalty);
  EXPECT_DOUBLE_EQ(shaped_reward(t, cfg), -cfg.loss_penalty - cfg.step_penalty);
}

TEST(RewardProperty, HeuristicDominatedByWinBonus) {
  const RewardConfig cfg;
  Rng rng(2);
  for (int g = 0; g < 100; ++g) {
    Board b = game::new_board(rng);
    while (!game::is_terminal(b)) {
      const auto t = game::step(b, uniform_legal(game::legal_actions(b), rng), rng);
      const double h = heuristic_component(t, cfg);
      EXPECT_LT(std::abs(h), cfg.win_bonus);
      EXPECT_LE(std::abs(h), cfg.heuristic_clip);
      EXPECT_TRUE(std::isfinite(shaped_reward(t, cfg)));
      b = t.after_spawn;
    }
  }
  EXPECT_GE(cfg.win_bonus, 10 * cfg.heuristic_clip);
}

TEST(Epsilon, Schedule) {
  EXPECT_EQ(epsilon_at(0), 1.0);
  EXPECT_EQ(epsilon_at(1999), 1.0);
  EXPECT_NEAR(epsilon_at(2000), 0.95, 1e-12);
  EXPECT_NEAR(epsilon_at(19 * 2000), 0.05, 1e-12);
  EXPECT_EQ(epsilon_at(10'000'000), 0.05);
  double prev = 2;
  for (long i = 0; i <= 1'000'000; i += 250) {
    const double e = epsilon_at(i);
    EXPECT_LE(e, prev);
    EXPECT_GE(e, 0.05);
    EXPECT_LE(e, 1.0);
    prev = e;
  }
  EXPECT_THROW(epsilon_at(-1), std::invalid_argument);
}

TEST(Config, Validation) {
  DqnConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = DqnConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = DqnConfig{};
  c.reward.win_bonus = 100;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(DqnConfig{}.layer_sizes(), (std::vector<int>{584, 500, 500, 500, 4}));
}

TEST(SelectAction, UniformWhenExploring) {
  const auto net = init_network<float>({584, 4}, 1);
  ActionSet legal;
  legal.insert(Action::Up);
  legal.insert(Action::Left);
  legal.insert(Action::Right);
  Rng rng(3);
  std::map<Action, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[select_action(net, InputVector{}, legal, 1.0, rng)];
  EXPECT_EQ(counts.count(Action::Down), 0u);
  double chi2 = 0;
  for (auto [a, c] : counts) chi2 += (c - n / 3.0) * (c - n / 3.0) / (n / 3.0);
  EXPECT_LT(chi2, 9.21);  // 2 dof, p = 0.01
}

TEST(SelectAction, GreedyTieBreakAndShift) {
  auto net = init_network<float>({584, 4}, 2);
  net.layers[0].weights.setZero();
  ActionSet legal;
  legal.insert(Action::Left);
  legal.insert(Action::Down);
  Rng rng(4);
  EXPECT_EQ(select_action(net, InputVector{}, legal, 0.0, rng), Action::Down);
  EXPECT_THROW(select_action(net, InputVector{}, ActionSet{}, 0.0, rng), std::invalid_argument);

  auto random_net = init_network<float>({584, 8, 4}, 5);
  Rng r2(6);
  for (int i = 0; i < 50; ++i) {
    encoding::History h;
    const auto in = encoding::encode_input(random_board(r2), h);
    ActionSet all;
    all.bits = 0xF;
    const Action before = select_action(random_net, in, all, 0.0, r2);
    auto shifted = random_net;
    shifted.layers.back().bias.array() += 3.5f;
    EXPECT_EQ(select_action(shifted, in, all, 0.0, r2), before);
  }
}

TEST(SelectActionProperty, NeverIllegal) {
  const auto net = init_network<float>({584, 8, 4}, 7);
  Rng rng(8);
  for (int g = 0; g < 30; ++g) {
    Board b = game::new_board(rng);
    encoding::History h;
    while (!game::is_terminal(b)) {
      const auto legal = game::legal_actions(b);
      const Action a = select_action(net, encoding::encode_input(b, h), legal, 0.3, rng);
      ASSERT_TRUE(game::slide_merge(b, a).moved);
      h.push(b, a);
      b = game::step(b, a, rng).after_spawn;
    }
  }
}

TEST(Replay, RingOverwrite) {
  ReplayBuffer buf(30000);
  Rng rng(9);
  Experience e = random_experience(rng, false);
  for (int i = 0; i < 30001; ++i) {
    e.reward = static_cast<float>(i);
    buf.push(e);
  }
  EXPECT_EQ(buf.size(), 30000u);
  EXPECT_EQ(buf[0].reward, 30000.0f);  // oldest slot replaced
  EXPECT_EQ(buf[1].reward, 1.0f);
  EXPECT_EQ(buf.cursor(), 1u);
}

TEST(ReplayProperty, UniformSampling) {
  const std::size_t cap = 50;
  ReplayBuffer buf(cap);
  Rng rng(10);
  for (std::size_t i = 0; i < cap; ++i) buf.push(random_experience(rng, false));
  std::vector<int> hits(cap, 0);
  const int draws = 100000;
  for (auto i : buf.sample_indices(draws, rng)) ++hits[i];
  const double p = 1.0 / cap, mean = draws * p, sd = std::sqrt(draws * p * (1 - p));
  for (int h : hits) EXPECT_LT(std::abs(h - mean), 3 * sd);
}

TEST(TdTargets, TerminalAndZeroGamma) {
  Rng rng(11);
  const auto target = nn::snapshot(init_network<float>({584, 8, 4}, 12));
  const Experience term = random_experience(rng, true);
  const Experience live = random_experience(rng, false);
  const std::vector<const Experience*> batch{&term, &live};
  const auto y = td_targets(batch, target, 0.9);
  EXPECT_DOUBLE_EQ(y[0], term.reward);
  const auto y0 = td_targets(batch, target, 1e-300);
  EXPECT_NEAR(y0[1], live.reward, 1e-12);
  EXPECT_THROW(td_targets(std::span<const Experience* const>{}, target, 0.9), std::invalid_argument);
}

TEST(TdTargets, HandComputedLinearTarget) {
  // single linear layer: Q(s', a) = sum of weights over set bits + bias
  QNetwork net;
  Eigen::MatrixXf w(4, encoding::kInputSize);
  Rng rng(13);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  Eigen::VectorXf b(4);
  b << 0.5f, -0.25f, 0.125f, 1.0f;
  net.layers.push_back({w, b, nn::Activation::Identity});
  const auto snap = nn::snapshot(net);

  Experience e1 = random_experience(rng, false);
  Experience e2 = random_experience(rng, false);
  e2.next_legal = ActionSet{};
  e2.next_legal.insert(Action::Up);
  e2.next_legal.insert(Action::Left);
  const std::vector<const Experience*> batch{&e1, &e2};
  const double gamma = 0.9;
  const auto y = td_targets(batch, snap, gamma);

  for (int j = 0; j < 2; ++j) {
    const Experience& e = *batch[j];
    double best = -1e300;
    for (int a = 0; a < 4; ++a) {
      if (!e.next_legal.contains(game::action_from_code(a))) continue;
      double q = b(a);
      for (std::size_t k = 0; k < encoding::kInputSize; ++k)
        if (e.next_input.test(k)) q += w(a, static_cast<Eigen::Index>(k));
      best = std::max(best, q);
    }
    EXPECT_NEAR(y[j], e.reward + gamma * best, 1e-4);
  }
}

TEST(Trainer, UnderfullAndBudgetZero) {
  Trainer t(small_config(), 1);
  EXPECT_THROW(t.train_step(), std::logic_error);
  const auto init = t.network();
  t.run(0);
  EXPECT_TRUE(t.network() == init);
  EXPECT_TRUE(t.stats().episodes.empty());
  EXPECT_TRUE(t.stats().loss_curve.empty());
}

TEST(Trainer, ZeroLearningRateKeepsParameters) {
  auto c = small_config();
  c.learning_rate = 0;
  Trainer t(c, 2);
  const auto init = t.network();
  t.run(200);
  EXPECT_TRUE(t.network() == init);
  EXPECT_EQ(t.train_steps(), 200);
}

TEST(Trainer, LossNonNegativeAndTargetIsolated) {
  auto c = small_config();
  c.target_update_period = 1000;
  Trainer t(c, 3);
  Rng rng(14);
  for (int i = 0; i < 64; ++i) t.remember(random_experience(rng, i % 5 == 0));
  std::vector<const Experience*> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(&t.replay()[i]);
  const auto before = td_targets(batch, t.target(), c.gamma);
  for (int i = 0; i < 200; ++i) EXPECT_GE(t.train_step(), 0.0);
  EXPECT_FALSE(t.network() == t.target().network);
  EXPECT_EQ(td_targets(batch, t.target(), c.gamma), before);
}

TEST(Trainer, TargetRefreshPeriod) {
  auto c = small_config();
  c.target_update_period = 10;
  Trainer t(c, 4);
  Rng rng(15);
  for (int i = 0; i < 64; ++i) t.remember(random_experience(rng, false));
  for (int i = 0; i < 10; ++i) t.train_step();
  EXPECT_TRUE(t.network() == t.target().network);
  t.train_step();
  EXPECT_FALSE(t.network() == t.target().network);
}

TEST(Trainer, SingleStateFixedPoint) {
  // one state, one action, reward r, gamma 0: Q converges to r
  auto c = small_config();
  c.gamma = 1e-300;
  c.learning_rate = 0.01;
  c.clip_norm = 0;
  QNetwork online = init_network<float>(c.layer_sizes(), 5);
  Rng rng(16);
  Experience e = random_experience(rng, false);
  e.reward = 0.7f;
  e.action = Action::Right;
  std::vector<const Experience*> batch(static_cast<std::size_t>(c.batch_size), &e);
  for (int i = 0; i < 2000; ++i) fit_minibatch(online, nn::snapshot(online), batch, c);
  const Eigen::VectorXf q = nn::forward(online, dense_input(e.input));
  EXPECT_NEAR(q(game::code(Action::Right)), 0.7, 1e-3);
}

TEST(Trainer, DeterministicAndResumable) {
  const auto c = small_config();
  Trainer a(c, 7);
  a.run(600);
  Trainer b(c, 7);
  b.run(300);
  const auto path = (std::filesystem::temp_directory_path() / "robo2048_trainer_state.txt").string();
  save_trainer(b, path);
  Trainer resumed = load_trainer(c, 7, path);
  resumed.run(600);
  b.run(600);
  EXPECT_TRUE(a.network() == b.network());
  EXPECT_TRUE(resumed.network() == a.network());
  EXPECT_TRUE(resumed.target().network == a.target().network);
  EXPECT_EQ(resumed.stats().episodes.size(), a.stats().episodes.size());
  EXPECT_EQ(resumed.stats().loss_curve, a.stats().loss_curve);
  std::filesystem::remove(path);
}

TEST(Trainer, EpisodesAccounted) {
  auto c = small_config();
  c.train_steps = 3000;
  const auto r = train(c, 8);
  long moves = 0;
  for (const auto& g : r.stats.episodes) {
    EXPECT_GT(g.moves, 0);
    EXPECT_GE(g.max_tile_exponent, 2);
    moves += g.moves;
  }
  EXPECT_LE(moves, 3000 + c.batch_size);
  EXPECT_EQ(r.stats.loss_curve.size(), 3u);
  EXPECT_TRUE(r.network.all_finite());
}

TEST(Evaluate, RandomBaselineMatchesPublishedRates) {
  const auto s = evaluate_policy(random_policy(), 10000, 1);
  EXPECT_NEAR(s.reach_rate(7), 53.98, 3.0);
  EXPECT_NEAR(s.reach_rate(8), 7.09, 2.0);
  EXPECT_THROW(evaluate_policy(random_policy(), 0, 1), std::invalid_argument);
}

TEST(Evaluate, Deterministic) {
  const auto a = evaluate_policy(random_policy(), 50, 3);
  const auto b = evaluate_policy(random_policy(), 50, 3);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(a.games[i].moves, b.games[i].moves);
}

TEST(EvalCsv, RowsSumToSummary) {
  const auto s = evaluate_policy(random_policy(), 200, 4);
  std::ostringstream os;
  write_eval_csv(os, s);
  std::istringstream is(os.str());
  std::string line;
  int rows = 0, reached128 = 0;
  double summary128 = -1;
  bool in_summary = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') {
      in_summary = line == "# summary";
      continue;
    }
    if (line.rfind("episode", 0) == 0 || line.rfind("target", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    if (in_summary) {
      if (f[0] == "128") summary128 = std::stod(f[1]);
    } else {
      ++rows;
      reached128 += std::stoi(f[3]);
    }
  }
  EXPECT_EQ(rows, 200);
  EXPECT_NEAR(summary128, 100.0 * reached128 / 200, 1e-9);
}
