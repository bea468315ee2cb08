#pragma once

#include <cstddef>
#include <vector>

namespace requisites::bn::detail {

// Non-negative table over a set of variables. Scope is kept sorted ascending
// by variable index; values are row-major with the last scope variable fastest.
struct Factor {
  std::vector<std::size_t> scope;
  std::vector<std::size_t> card;
  std::vector<double> values;

  bool contains(std::size_t var) const;
};

Factor multiply(const Factor& a, const Factor& b);
Factor sum_out(const Factor& f, std::size_t var);

}  // namespace requisites::bn::detail
