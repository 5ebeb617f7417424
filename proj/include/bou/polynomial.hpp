#pragma once
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "multi_index.hpp"

namespace bou {

// sparse multivariate polynomial in the monomial basis
class Polynomial {
 public:
  using TermMap = std::map<MultiIndex, double, GradedLess>;

  explicit Polynomial(int dim = 1) : d_(dim) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("polynomial dimension must be 1..3");
  }

  int dim() const { return d_; }
  const TermMap& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  double coeff(const MultiIndex& p) const {
    auto it = terms_.find(p);
    return it == terms_.end() ? 0.0 : it->second;
  }

  void set(const MultiIndex& p, double c) {
    if (p.d != d_) throw std::invalid_argument("multi-index dimension mismatch");
    if (c == 0.0)
      terms_.erase(p);
    else
      terms_[p] = c;
  }

  void add_term(const MultiIndex& p, double c) {
    if (p.d != d_) throw std::invalid_argument("multi-index dimension mismatch");
    double& slot = terms_[p];
    slot += c;
    if (slot == 0.0) terms_.erase(p);
  }

  int total_degree() const {
    int deg = 0;
    for (const auto& [p, c] : terms_) deg = std::max(deg, p.order());
    return deg;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& [p, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  Polynomial& operator+=(const Polynomial& o) {
    check_dim(o);
    for (const auto& [p, c] : o.terms_) add_term(p, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    check_dim(o);
    for (const auto& [p, c] : o.terms_) add_term(p, -c);
    return *this;
  }
  Polynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& [p, c] : terms_) c *= s;
    return *this;
  }
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

  Polynomial operator*(const Polynomial& o) const {
    check_dim(o);
    Polynomial r(d_);
    for (const auto& [p, c] : terms_)
      for (const auto& [q, e] : o.terms_) {
        MultiIndex pq = p;
        for (int i = 0; i < d_; ++i) pq.v[i] = static_cast<std::uint16_t>(p.v[i] + q.v[i]);
        r.add_term(pq, c * e);
      }
    return r;
  }

  double eval(const double* x) const {
    double s = 0.0;
    for (const auto& [p, c] : terms_) {
      double t = c;
      for (int i = 0; i < d_; ++i)
        for (int k = 0; k < p.v[i]; ++k) t *= x[i];
      s += t;
    }
    return s;
  }
  double eval1(double x) const { return eval(&x); }

  Polynomial derivative(int axis) const {
    Polynomial r(d_);
    for (const auto& [p, c] : terms_) {
      if (p.v[axis] == 0) continue;
      MultiIndex q = p;
      q.v[axis] -= 1;
      r.add_term(q, c * p.v[axis]);
    }
    return r;
  }

  // drops terms with |coeff| <= eps * max|coeff|
  void trim(double eps) {
    double scale = max_abs_coeff();
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (std::abs(it->second) <= eps * scale)
        it = terms_.erase(it);
      else
        ++it;
    }
  }

 private:
  void check_dim(const Polynomial& o) const {
    if (o.d_ != d_) throw std::invalid_argument("polynomial dimension mismatch");
  }
  int d_;
  TermMap terms_;
};

inline Polynomial monomial(int dim, const MultiIndex& p, double c = 1.0) {
  Polynomial f(dim);
  f.set(p, c);
  return f;
}

// flat term list for hot-loop evaluation
struct CompiledPoly {
  struct Term {
    std::uint16_t e[3];
    double c;
  };
  int d = 1;
  std::vector<Term> terms;

  CompiledPoly() = default;
  explicit CompiledPoly(const Polynomial& f) : d(f.dim()) {
    terms.reserve(f.terms().size());
    for (const auto& [p, c] : f.terms()) terms.push_back({{p.v[0], p.v[1], p.v[2]}, c});
  }

  double eval(const double* x) const {
    double s = 0.0;
    for (const Term& t : terms) {
      double v = t.c;
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < t.e[i]; ++k) v *= x[i];
      s += v;
    }
    return s;
  }
};

// 1-d dense coefficient view (ascending powers), used by the quadrature panels
inline std::vector<double> dense_coeffs_1d(const Polynomial& f) {
  if (f.dim() != 1) throw std::invalid_argument("dense_coeffs_1d needs d=1");
  std::vector<double> c(static_cast<std::size_t>(f.total_degree()) + 1, 0.0);
  for (const auto& [p, a] : f.terms()) c[p.v[0]] = a;
  return c;
}

inline double horner(const std::vector<double>& c, double x) {
  double s = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) s = s * x + c[i];
  return s;
}

}  // namespace bou
