#include "factor.hpp"

#include <algorithm>

namespace requisites::bn::detail {

bool Factor::contains(std::size_t var) const {
  return std::binary_search(scope.begin(), scope.end(), var);
}

namespace {

std::vector<std::size_t> strides_in(const Factor& f, const std::vector<std::size_t>& scope) {
  std::vector<std::size_t> own(f.scope.size());
  std::size_t s = 1;
  for (std::size_t i = f.scope.size(); i-- > 0;) {
    own[i] = s;
    s *= f.card[i];
  }
  std::vector<std::size_t> out(scope.size(), 0);
  for (std::size_t i = 0, j = 0; i < scope.size() && j < f.scope.size(); ++i) {
    if (scope[i] == f.scope[j]) out[i] = own[j++];
  }
  return out;
}

}  // namespace

Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  out.scope.reserve(a.scope.size() + b.scope.size());
  out.card.reserve(a.scope.size() + b.scope.size());
  std::size_t i = 0, j = 0;
  while (i < a.scope.size() || j < b.scope.size()) {
    if (j == b.scope.size() || (i < a.scope.size() && a.scope[i] < b.scope[j])) {
      out.scope.push_back(a.scope[i]);
      out.card.push_back(a.card[i++]);
    } else if (i == a.scope.size() || b.scope[j] < a.scope[i]) {
      out.scope.push_back(b.scope[j]);
      out.card.push_back(b.card[j++]);
    } else {
      out.scope.push_back(a.scope[i]);
      out.card.push_back(a.card[i]);
      ++i;
      ++j;
    }
  }
  std::size_t total = 1;
  for (auto c : out.card) total *= c;
  out.values.resize(total);

  const auto sa = strides_in(a, out.scope);
  const auto sb = strides_in(b, out.scope);
  const std::size_t k = out.scope.size();
  std::vector<std::size_t> digit(k, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t n = 0; n < total; ++n) {
    out.values[n] = a.values[ia] * b.values[ib];
    for (std::size_t d = k; d-- > 0;) {
      if (++digit[d] < out.card[d]) {
        ia += sa[d];
        ib += sb[d];
        break;
      }
      digit[d] = 0;
      ia -= (out.card[d] - 1) * sa[d];
      ib -= (out.card[d] - 1) * sb[d];
    }
  }
  return out;
}

Factor sum_out(const Factor& f, std::size_t var) {
  const auto it = std::lower_bound(f.scope.begin(), f.scope.end(), var);
  if (it == f.scope.end() || *it != var) return f;
  const auto pos = static_cast<std::size_t>(it - f.scope.begin());

  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < pos; ++i) outer *= f.card[i];
  for (std::size_t i = pos + 1; i < f.scope.size(); ++i) inner *= f.card[i];
  const std::size_t c = f.card[pos];

  Factor out;
  out.scope = f.scope;
  out.card = f.card;
  out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(pos));
  out.card.erase(out.card.begin() + static_cast<std::ptrdiff_t>(pos));
  out.values.assign(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < c; ++s) {
      const double* src = &f.values[(o * c + s) * inner];
      double* dst = &out.values[o * inner];
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  return out;
}

}  // namespace requisites::bn::detail
