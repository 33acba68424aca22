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
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "robo2048/rng.hpp"

namespace robo2048::game {

inline constexpr int kSide = 4;
inline constexpr int kCells = 16;
inline constexpr int kMaxExponent = 11;  // 2048

/// 4x4 grid of tile exponents, row-major. 0 is empty, e encodes 2^e.
struct Board {
  std::array<std::uint8_t, kCells> cells{};

  std::uint8_t& at(int row, int col) { return cells[row * kSide + col]; }
  std::uint8_t at(int row, int col) const { return cells[row * kSide + col]; }

  friend bool operator==(const Board&, const Board&) = default;
};

enum class Action : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr std::array<Action, 4> kAllActions{Action::Up, Action::Down, Action::Left,
                                                   Action::Right};

constexpr int code(Action a) { return static_cast<int>(a); }

inline Action action_from_code(int c) {
  if (c < 0 || c > 3) throw std::invalid_argument("action code out of range");
  return static_cast<Action>(c);
}

inline const char* action_name(Action a) {
  switch (a) {
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Left: return "left";
    case Action::Right: return "right";
  }
  return "?";
}

/// Bitmask over action codes (bit i set means action i).
struct ActionSet {
  std::uint8_t bits = 0;

  bool contains(Action a) const { return (bits >> code(a)) & 1U; }
  void insert(Action a) { bits = static_cast<std::uint8_t>(bits | (1U << code(a))); }
  bool empty() const { return bits == 0; }
  int size() const { return std::popcount(static_cast<unsigned>(bits)); }
  std::vector<Action> to_vector() const {
    std::vector<Action> out;
    for (Action a : kAllActions)
      if (contains(a)) out.push_back(a);
    return out;
  }
  friend bool operator==(const ActionSet&, const ActionSet&) = default;
};

struct SlideResult {
  Board board;
  bool moved = false;
  int merged_sum = 0;
  int merges = 0;
};

struct Transition {
  Board before;
  Action action = Action::Up;
  Board after_slide;
  Board after_spawn;
  bool moved = false;
  int merged_sum = 0;
  int merges = 0;
  bool terminal = false;
};

namespace detail {

// Cell indices of line `line` for `a`, ordered from the edge tiles move toward.
inline std::array<int, kSide> line_indices(Action a, int line) {
  std::array<int, kSide> idx{};
  for (int k = 0; k < kSide; ++k) {
    switch (a) {
      case Action::Left: idx[k] = line * kSide + k; break;
      case Action::Right: idx[k] = line * kSide + (kSide - 1 - k); break;
      case Action::Up: idx[k] = k * kSide + line; break;
      case Action::Down: idx[k] = (kSide - 1 - k) * kSide + line; break;
    }
  }
  return idx;
}

}  // namespace detail

/// Compacts a line toward index 0 and merges equal neighbours once each,
/// scanning from index 0. Two 2048 tiles do not merge.
inline std::array<std::uint8_t, kSide> merge_line(const std::array<std::uint8_t, kSide>& in,
                                                  int* merged_sum = nullptr, int* merges = nullptr) {
  std::array<std::uint8_t, kSide> out{};
  int n = 0;
  bool last_locked = true;
  for (std::uint8_t v : in) {
    if (v == 0) continue;
    if (!last_locked && out[n - 1] == v && v < kMaxExponent) {
      out[n - 1] = static_cast<std::uint8_t>(v + 1);
      last_locked = true;
      if (merged_sum) *merged_sum += 1 << (v + 1);
      if (merges) ++*merges;
    } else {
      out[n++] = v;
      last_locked = false;
    }
  }
  return out;
}

inline SlideResult slide_merge(const Board& board, Action action) {
  SlideResult r;
  r.board = board;
  for (int line = 0; line < kSide; ++line) {
    const auto idx = detail::line_indices(action, line);
    std::array<std::uint8_t, kSide> vals{};
    for (int k = 0; k < kSide; ++k) vals[k] = board.cells[idx[k]];
    const auto merged = merge_line(vals, &r.merged_sum, &r.merges);
    for (int k = 0; k < kSide; ++k) r.board.cells[idx[k]] = merged[k];
  }
  r.moved = !(r.board == board);
  return r;
}

inline int count_empty(const Board& b) {
  return static_cast<int>(std::count(b.cells.begin(), b.cells.end(), 0));
}

inline int max_tile(const Board& b) { return *std::max_element(b.cells.begin(), b.cells.end()); }

/// Sum of tile values (2^e over non-empty cells).
inline long tile_sum(const Board& b) {
  long s = 0;
  for (auto e : b.cells)
    if (e) s += 1L << e;
  return s;
}

inline ActionSet legal_actions(const Board& b) {
  ActionSet s;
  for (Action a : kAllActions)
    if (slide_merge(b, a).moved) s.insert(a);
  return s;
}

inline bool is_terminal(const Board& b) { return legal_actions(b).empty(); }

/// Fills one uniformly chosen empty cell with 2 (p=0.9) or 4 (p=0.1).
/// The cell is drawn first, then the value.
inline Board spawn_random(const Board& board, Rng& rng) {
  std::array<int, kCells> empties{};
  int n = 0;
  for (int i = 0; i < kCells; ++i)
    if (board.cells[i] == 0) empties[n++] = i;
  if (n == 0) throw std::domain_error("no empty cell");
  Board out = board;
  const int cell = empties[rng.uniform_index(static_cast<std::uint64_t>(n))];
  out.cells[cell] = rng.bernoulli(0.9) ? 1 : 2;
  return out;
}

inline Board new_board(Rng& rng) {
  Board b;
  b = spawn_random(b, rng);
  return spawn_random(b, rng);
}

/// One game move with a caller-supplied spawn rule. A move that changes
/// nothing leaves the board untouched and spawns nothing.
template <typename SpawnFn>
Transition step_with(const Board& board, Action action, SpawnFn&& spawn) {
  Transition t;
  t.before = board;
  t.action = action;
  const SlideResult s = slide_merge(board, action);
  t.after_slide = s.board;
  t.moved = s.moved;
  t.merged_sum = s.merged_sum;
  t.merges = s.merges;
  t.after_spawn = s.moved ? spawn(s.board) : board;
  t.terminal = is_terminal(t.after_spawn);
  return t;
}

inline Transition step(const Board& board, Action action, Rng& rng) {
  return step_with(board, action, [&rng](const Board& b) { return spawn_random(b, rng); });
}

// Text form: four lines of four space-separated exponents, "." accepted as 0.

inline std::string to_text(const Board& b) {
  std::ostringstream os;
  for (int r = 0; r < kSide; ++r) {
    for (int c = 0; c < kSide; ++c) {
      if (c) os << ' ';
      os << static_cast<int>(b.at(r, c));
    }
    os << '\n';
  }
  return os.str();
}

inline Board parse_board(std::istream& is) {
  Board b;
  for (int i = 0; i < kCells; ++i) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("board: expected 16 cells");
    if (tok == ".") {
      b.cells[i] = 0;
      continue;
    }
    std::size_t used = 0;
    int v = -1;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v < 0 || v > kMaxExponent)
      throw std::runtime_error("board: bad cell '" + tok + "'");
    b.cells[i] = static_cast<std::uint8_t>(v);
  }
  return b;
}

inline Board parse_board(const std::string& text) {
  std::istringstream is(text);
  return parse_board(is);
}

inline std::ostream& operator<<(std::ostream& os, const Board& b) { return os << to_text(b); }

inline std::ostream& operator<<(std::ostream& os, Action a) { return os << action_name(a); }

}  // namespace robo2048::game
