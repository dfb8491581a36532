#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "unmt/tensor.hpp"

namespace unmt {

// Number of adjacent transpositions applied to a sequence of n elements.
constexpr std::size_t swap_count(std::size_t n) { return n / 2; }

// Applies floor(n/2) sequential adjacent transpositions, each at a position
// drawn uniformly (with replacement) from {0, ..., n-2}. The draws are
// appended to `positions` when it is non-null.
template <typename Token>
std::vector<Token> corrupt(std::span<const Token> tokens, Rng& rng, std::vector<std::size_t>* positions = nullptr) {
  std::vector<Token> out(tokens.begin(), tokens.end());
  const std::size_t n = out.size();
  if (n < 2) return out;
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  for (std::size_t k = 0; k < swap_count(n); ++k) {
    const std::size_t i = pick(rng);
    std::swap(out[i], out[i + 1]);
    if (positions) positions->push_back(i);
  }
  return out;
}

template <typename Token>
std::vector<Token> corrupt(const std::vector<Token>& tokens, Rng& rng, std::vector<std::size_t>* positions = nullptr) {
  return corrupt(std::span<const Token>(tokens), rng, positions);
}

}  // namespace unmt
