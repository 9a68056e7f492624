#pragma once

#include "aklab/numeric.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace aklab {

// Truncated bivariate Taylor series in (d theta, d r) up to total order 4.
// Coefficient (a, b) multiplies dθ^a dr^b, so D_(a,b) f = a! b! c(a, b).
template <class T>
class Tps {
 public:
  static constexpr int kMaxOrder = 4;
  static constexpr int kSize = 15;

  static constexpr int index(int a, int b) { return (a + b) * (a + b + 1) / 2 + b; }

  Tps() : order_(kMaxOrder) { c_.fill(T(0)); }
  explicit Tps(int order) : order_(order) {
    if (order < 0 || order > kMaxOrder) throw std::invalid_argument("jet order must be 0..4");
    c_.fill(T(0));
  }

  static Tps constant(const T& v, int order) {
    Tps t(order);
    t.c_[0] = v;
    return t;
  }
  // base + d theta (which = 0) or base + d r (which = 1)
  static Tps variable(const T& base, int which, int order) {
    Tps t = constant(base, order);
    if (order >= 1) t.c_[which == 0 ? index(1, 0) : index(0, 1)] = T(1);
    return t;
  }

  int order() const { return order_; }
  const T& coef(int a, int b) const { return c_[index(a, b)]; }
  T& coef(int a, int b) { return c_[index(a, b)]; }
  const T& value() const { return c_[0]; }
  T& value() { return c_[0]; }

  T derivative(int a, int b) const {
    static const long fact[] = {1, 1, 2, 6, 24};
    return c_[index(a, b)] * T(fact[a] * fact[b]);
  }

  Tps& operator+=(const Tps& o) {
    for (int i = 0; i < size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Tps& operator-=(const Tps& o) {
    for (int i = 0; i < size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  template <class U>
  Tps& scale(const U& k) {
    for (int i = 0; i < size(); ++i) c_[i] *= k;
    return *this;
  }

  friend Tps operator+(Tps a, const Tps& b) { return a += b; }
  friend Tps operator-(Tps a, const Tps& b) { return a -= b; }
  friend Tps operator-(Tps a) { return a.scale(T(-1)); }

  friend Tps operator*(const Tps& a, const Tps& b) {
    Tps out(std::min(a.order_, b.order_));
    int K = out.order_;
    for (int ta = 0; ta <= K; ++ta)
      for (int tb = 0; ta + tb <= K; ++tb)
        for (int ia = 0; ia <= ta; ++ia)
          for (int ib = 0; ib <= tb; ++ib) {
            // (ta - ia, ia) * (tb - ib, ib)
            const T& x = a.c_[index(ta - ia, ia)];
            const T& y = b.c_[index(tb - ib, ib)];
            out.c_[index(ta + tb - ia - ib, ia + ib)] += x * y;
          }
    return out;
  }

  int size() const { return (order_ + 1) * (order_ + 2) / 2; }

 private:
  int order_;
  std::array<T, kSize> c_;
};

}  // namespace aklab
