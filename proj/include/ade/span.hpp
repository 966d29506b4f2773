#pragma once

#include <compare>
#include <cstddef>

namespace ade {

// Half-open character interval [begin, end) into some source string.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend auto operator<=>(const CharSpan&, const CharSpan&) = default;

  std::size_t size() const { return end - begin; }
};

inline bool spans_overlap(CharSpan a, CharSpan b) {
  return a.begin < b.end && b.begin < a.end;
}

// Inclusive token index range [begin, end].
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend auto operator<=>(const TokenSpan&, const TokenSpan&) = default;
};

}  // namespace ade
