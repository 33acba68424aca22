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
#include <bitset>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "robo2048/game.hpp"

namespace robo2048::encoding {

inline constexpr std::size_t kSections = 12;
inline constexpr std::size_t kBoardBits = kSections * game::kCells;  // 192
inline constexpr std::size_t kActionBits = 4;
inline constexpr std::size_t kHistory = 2;
inline constexpr std::size_t kInputSize = (kHistory + 1) * kBoardBits + kHistory * kActionBits;

/// Section-major bitmap: bit (e * 16 + p) is set iff cell p holds exponent e.
using EncodedBoard = std::bitset<kBoardBits>;

/// [board t | board t-1 | action t-1 | board t-2 | action t-2]
using InputVector = std::bitset<kInputSize>;

struct HistoryEntry {
  game::Board board;
  game::Action action = game::Action::Up;
};

inline EncodedBoard encode_board(const game::Board& board) {
  EncodedBoard bits;
  for (std::size_t p = 0; p < game::kCells; ++p) bits.set(board.cells[p] * game::kCells + p);
  return bits;
}

/// Inverse of encode_board. Throws if a position has no section bit or more than one.
inline game::Board decode_board(const EncodedBoard& bits) {
  game::Board b;
  for (std::size_t p = 0; p < game::kCells; ++p) {
    int found = -1;
    for (std::size_t e = 0; e < kSections; ++e) {
      if (!bits.test(e * game::kCells + p)) continue;
      if (found >= 0) throw std::runtime_error("decode_board: position in two sections");
      found = static_cast<int>(e);
    }
    if (found < 0) throw std::runtime_error("decode_board: position in no section");
    b.cells[p] = static_cast<std::uint8_t>(found);
  }
  return b;
}

/// `history[0]` is the most recent (board, action) pair. Missing entries stay zero.
inline InputVector encode_input(const game::Board& current, std::span<const HistoryEntry> history) {
  if (history.size() > kHistory) throw std::invalid_argument("encode_input: history longer than 2");
  InputVector in;
  auto put_board = [&in](const game::Board& b, std::size_t offset) {
    for (std::size_t p = 0; p < game::kCells; ++p) in.set(offset + b.cells[p] * game::kCells + p);
  };
  put_board(current, 0);
  std::size_t offset = kBoardBits;
  for (const HistoryEntry& h : history) {
    put_board(h.board, offset);
    in.set(offset + kBoardBits + game::code(h.action));
    offset += kBoardBits + kActionBits;
  }
  return in;
}

/// Rolling window of the last two (board, action) pairs of an episode.
class History {
 public:
  void push(const game::Board& board, game::Action action) {
    if (size_ > 0) entries_[1] = entries_[0];
    entries_[0] = HistoryEntry{board, action};
    if (size_ < kHistory) ++size_;
  }
  void clear() { size_ = 0; }
  std::span<const HistoryEntry> entries() const { return {entries_.data(), size_}; }

 private:
  std::array<HistoryEntry, kHistory> entries_{};
  std::size_t size_ = 0;
};

inline InputVector encode_input(const game::Board& current, const History& history) {
  return encode_input(current, history.entries());
}

/// Expands an input vector into `out` as 0/1 reals.
template <typename Scalar>
void to_dense(const InputVector& in, Scalar* out) {
  for (std::size_t i = 0; i < kInputSize; ++i) out[i] = in.test(i) ? Scalar(1) : Scalar(0);
}

}  // namespace robo2048::encoding
