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

#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "robo2048/dqn.hpp"

namespace robo2048::dqn {

// ---------------------------------------------------------------------------
// CSV export

inline void write_game_rows(std::ostream& os, const std::vector<GameRecord>& games) {
  os << "episode,moves,max_tile_exponent,reached128,reached256,mean_loss,moves_to_128,moves_to_256\n";
  os << std::setprecision(9);
  for (std::size_t i = 0; i < games.size(); ++i) {
    const auto& g = games[i];
    os << i << ',' << g.moves << ',' << g.max_tile_exponent << ',' << (g.max_tile_exponent >= 7) << ','
       << (g.max_tile_exponent >= 8) << ',' << g.mean_loss << ',' << g.moves_to_128 << ',' << g.moves_to_256 << '\n';
  }
}

/// Summary block: one row per target, winning rate then moves per game.
inline void write_summary(std::ostream& os, const EvalStats& s) {
  os << "# summary\n";
  os << "target,win_rate_pct,moves_per_game,games\n";
  os << std::setprecision(9);
  os << "128," << s.reach_rate(7) << ',' << s.mean_moves_to(7) << ',' << s.n() << '\n';
  os << "256," << s.reach_rate(8) << ',' << s.mean_moves_to(8) << ',' << s.n() << '\n';
}

inline void write_eval_csv(std::ostream& os, const EvalStats& s) {
  os << "# robo2048 eval v1\n";
  write_game_rows(os, s.games);
  write_summary(os, s);
}

inline void write_training_csv(std::ostream& os, const TrainingStats& s) {
  os << "# robo2048 training v1\n";
  write_game_rows(os, s.episodes);
  EvalStats all;
  all.games = s.episodes;
  write_summary(os, all);
}

inline void write_checkpoints_csv(std::ostream& os, const TrainingStats& s) {
  os << "# robo2048 training-checkpoints v1\n";
  os << "train_step,reach128_pct,reach256_pct,moves_to_128\n" << std::setprecision(9);
  for (const auto& c : s.checkpoints)
    os << c.train_step << ',' << c.reach128 << ',' << c.reach256 << ',' << c.mean_moves << '\n';
  os << "# loss per 1000 train steps\nblock,mean_loss\n";
  for (std::size_t i = 0; i < s.loss_curve.size(); ++i) os << i << ',' << s.loss_curve[i] << '\n';
}

// ---------------------------------------------------------------------------
// Full trainer state, for resuming a run.

struct TrainerState {
  static constexpr const char* kMagic = "DQNSTATE1";

  static void save(const Trainer& t, std::ostream& os) {
    os << kMagic << '\n';
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << t.train_steps_ << ' ' << t.iterations_ << ' ' << t.loss_block_ << '\n';
    os << t.rng_.state() << '\n';
    os << t.in_episode_ << '\n';
    write_board(os, t.board_);
    const auto h = t.history_.entries();
    os << h.size() << '\n';
    for (const auto& e : h) {
      write_board(os, e.board);
      os << game::code(e.action) << '\n';
    }
    write_record(os, t.episode_);
    os << t.episode_loss_ << ' ' << t.episode_updates_ << '\n';

    os << t.stats_.episodes.size() << '\n';
    for (const auto& g : t.stats_.episodes) write_record(os, g);
    os << t.stats_.loss_curve.size() << '\n';
    for (double l : t.stats_.loss_curve) os << l << '\n';
    os << t.stats_.checkpoints.size() << '\n';
    for (const auto& c : t.stats_.checkpoints)
      os << c.train_step << ' ' << c.reach128 << ' ' << c.reach256 << ' ' << c.mean_moves << '\n';

    os << t.replay_.capacity() << ' ' << t.replay_.cursor() << ' ' << t.replay_.size() << '\n';
    os << std::setprecision(std::numeric_limits<float>::max_digits10);
    for (std::size_t i = 0; i < t.replay_.size(); ++i) {
      const Experience& e = t.replay_[i];
      os << to_hex(e.input) << ' ' << game::code(e.action) << ' ' << e.reward << ' ' << to_hex(e.next_input) << ' '
         << int(e.next_legal.bits) << ' ' << e.terminal << '\n';
    }
    nn::write_checkpoint(os, t.online_);
    nn::write_checkpoint(os, t.target_.network);
  }

  static void load(Trainer& t, std::istream& is) {
    std::string magic;
    if (!(is >> magic) || magic != kMagic) throw std::runtime_error("trainer state: bad header");
    is >> t.train_steps_ >> t.iterations_ >> t.loss_block_;
    std::string rng_line;
    std::getline(is >> std::ws, rng_line);
    t.rng_.set_state(rng_line);
    is >> t.in_episode_;
    t.board_ = game::parse_board(is);
    std::size_t hn = 0;
    is >> hn;
    if (hn > encoding::kHistory) throw std::runtime_error("trainer state: bad history");
    std::vector<encoding::HistoryEntry> hist(hn);
    for (auto& e : hist) {
      e.board = game::parse_board(is);
      int a = 0;
      is >> a;
      e.action = game::action_from_code(a);
    }
    t.history_.clear();
    for (std::size_t i = hn; i-- > 0;) t.history_.push(hist[i].board, hist[i].action);
    t.episode_ = read_record(is);
    is >> t.episode_loss_ >> t.episode_updates_;

    std::size_t n = 0;
    is >> n;
    t.stats_ = TrainingStats{};
    for (std::size_t i = 0; i < n; ++i) t.stats_.episodes.push_back(read_record(is));
    is >> n;
    t.stats_.loss_curve.resize(n);
    for (auto& l : t.stats_.loss_curve) is >> l;
    is >> n;
    t.stats_.checkpoints.resize(n);
    for (auto& c : t.stats_.checkpoints) is >> c.train_step >> c.reach128 >> c.reach256 >> c.mean_moves;

    std::size_t cap = 0, cursor = 0, size = 0;
    is >> cap >> cursor >> size;
    if (!is || cap != t.replay_.capacity()) throw std::runtime_error("trainer state: replay capacity mismatch");
    std::vector<Experience> data(size);
    for (auto& e : data) {
      std::string in, next;
      int a = 0, legal = 0;
      is >> in >> a >> e.reward >> next >> legal >> e.terminal;
      e.input = from_hex(in);
      e.next_input = from_hex(next);
      e.action = game::action_from_code(a);
      e.next_legal.bits = static_cast<std::uint8_t>(legal);
    }
    if (!is) throw std::runtime_error("trainer state: truncated replay buffer");
    t.replay_.restore(std::move(data), cursor);
    t.online_ = nn::read_checkpoint<float>(is);
    t.target_ = nn::snapshot(nn::read_checkpoint<float>(is));
  }

 private:
  static void write_board(std::ostream& os, const Board& b) { os << game::to_text(b); }

  static void write_record(std::ostream& os, const GameRecord& g) {
    os << g.moves << ' ' << g.max_tile_exponent << ' ' << g.moves_to_128 << ' ' << g.moves_to_256 << ' ' << g.mean_loss
       << '\n';
  }

  static GameRecord read_record(std::istream& is) {
    GameRecord g;
    is >> g.moves >> g.max_tile_exponent >> g.moves_to_128 >> g.moves_to_256 >> g.mean_loss;
    if (!is) throw std::runtime_error("trainer state: truncated record");
    return g;
  }

  static std::string to_hex(const InputVector& v) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s((v.size() + 3) / 4, '0');
    for (std::size_t i = 0; i < s.size(); ++i) {
      unsigned nib = 0;
      for (std::size_t b = 0; b < 4; ++b)
        if (4 * i + b < v.size() && v.test(4 * i + b)) nib |= 1U << b;
      s[i] = kDigits[nib];
    }
    return s;
  }

  static InputVector from_hex(const std::string& s) {
    InputVector v;
    if (s.size() != (v.size() + 3) / 4) throw std::runtime_error("trainer state: bad input vector");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char c = s[i];
      const unsigned nib = c >= 'a' ? unsigned(c - 'a' + 10) : unsigned(c - '0');
      for (std::size_t b = 0; b < 4; ++b)
        if (4 * i + b < v.size() && (nib >> b & 1U)) v.set(4 * i + b);
    }
    return v;
  }
};

inline void save_trainer(const Trainer& t, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  TrainerState::save(t, os);
}

/// Restores a trainer saved with save_trainer. `cfg` must match the original run.
inline Trainer load_trainer(const DqnConfig& cfg, std::uint64_t seed, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  Trainer t(cfg, seed);
  TrainerState::load(t, is);
  return t;
}

}  // namespace robo2048::dqn
