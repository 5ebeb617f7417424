#pragma once
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bou {

// multi-index for d <= 3, ordered graded-lexicographically
struct MultiIndex {
  std::array<std::uint16_t, 3> v{0, 0, 0};
  std::uint8_t d = 1;

  MultiIndex() = default;
  MultiIndex(std::initializer_list<int> e) {
    d = static_cast<std::uint8_t>(e.size());
    if (d < 1 || d > 3) throw std::invalid_argument("multi-index dimension must be 1..3");
    int i = 0;
    for (int x : e) {
      if (x < 0) throw std::invalid_argument("negative multi-index entry");
      v[i++] = static_cast<std::uint16_t>(x);
    }
  }
  static MultiIndex zero(int dim) {
    MultiIndex p;
    p.d = static_cast<std::uint8_t>(dim);
    return p;
  }

  int order() const { return v[0] + v[1] + v[2]; }

  bool operator==(const MultiIndex& o) const { return d == o.d && v == o.v; }

  std::string str() const {
    std::string s = std::to_string(v[0]);
    for (int i = 1; i < d; ++i) s += "," + std::to_string(v[i]);
    return s;
  }
};

struct GradedLess {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const {
    if (a.order() != b.order()) return a.order() < b.order();
    return a.v < b.v;  // lexicographic within a grade
  }
};

inline MultiIndex parse_multi_index(const std::string& s, int dim) {
  MultiIndex p = MultiIndex::zero(dim);
  int i = 0;
  std::size_t pos = 0;
  while (pos <= s.size() && i < 3) {
    std::size_t comma = s.find(',', pos);
    std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    int x = std::stoi(tok);
    if (x < 0) throw std::invalid_argument("negative multi-index entry: " + s);
    p.v[i++] = static_cast<std::uint16_t>(x);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (i != dim) throw std::invalid_argument("multi-index '" + s + "' does not have dimension " + std::to_string(dim));
  return p;
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace bou
