#pragma once

// Error-free transforms and fixed-capacity floating-point expansions.
//
// An expansion stores a real number as a sum of doubles, ordered by increasing
// magnitude and nonoverlapping, so the sign of the whole sum is the sign of
// the last limb and the relative gap between the sum and its leading limb is
// below one ulp after compression. All operations here are exact; rounding
// happens only in round_down, which returns the largest double not above the
// stored value. The transform kernels lean on that: comparisons between
// candidate values are decided exactly, and each output value is rounded
// exactly once, downward, which is what makes the conjugacy laws of the
// c-transform hold as written instead of up to roundoff.
//
// Capacities are compile-time and sized by the callers from the number of
// summands they ever add, so no operation can spill; the asserts guard that
// accounting, they are not reachable through rounding behavior.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>

namespace bfm {
namespace exact {

struct Dd {
  double hi;
  double lo;  // |lo| <= ulp(hi)/2 and hi + lo is exact
};

inline Dd two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

// Requires |a| >= |b| or a == 0.
inline Dd fast_two_sum(double a, double b) {
  const double s = a + b;
  return {s, b - (s - a)};
}

inline Dd two_diff(double a, double b) {
  const double s = a - b;
  const double bb = s - a;
  const double err = (a - (s - bb)) - (b + bb);
  return {s, err};
}

#if defined(FP_FAST_FMA)
inline Dd two_prod(double a, double b) {
  const double p = a * b;
  return {p, std::fma(a, b, -p)};
}
#else
// Dekker's split; exact for the O(1) magnitudes used here (no overflow).
inline void split(double a, double& hi, double& lo) {
  const double c = 134217729.0 * a;  // 2^27 + 1
  hi = c - (c - a);
  lo = a - hi;
}

inline Dd two_prod(double a, double b) {
  const double p = a * b;
  double ah, al, bh, bl;
  split(a, ah, al);
  split(b, bh, bl);
  const double err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
  return {p, err};
}
#endif

template <int Cap>
struct Exp {
  double q[Cap];
  int n = 0;

  void clear() { n = 0; }

  void set(double v) {
    n = 0;
    if (v != 0.0) q[n++] = v;
  }

  // Adds one double exactly (grow_expansion with zero elimination). The
  // nonoverlapping increasing-magnitude invariant is preserved.
  void grow(double b) {
    if (b == 0.0) return;
    double acc = b;
    int out = 0;
    for (int i = 0; i < n; ++i) {
      const Dd s = two_sum(acc, q[i]);
      acc = s.hi;
      if (s.lo != 0.0) {
        assert(out < Cap);
        q[out++] = s.lo;
      }
    }
    if (acc != 0.0) {
      assert(out < Cap);
      q[out++] = acc;
    }
    n = out;
  }

  void grow_dd(const Dd& d) {
    grow(d.lo);
    grow(d.hi);
  }

  template <int C2>
  void grow_exp(const Exp<C2>& e) {
    for (int i = 0; i < e.n; ++i) grow(e.q[i]);
  }

  template <int C2>
  void grow_exp_negated(const Exp<C2>& e) {
    for (int i = 0; i < e.n; ++i) grow(-e.q[i]);
  }

  void load(const double* limbs, int count) {
    n = count;
    for (int i = 0; i < count; ++i) q[i] = limbs[i];
  }

  // Two fast_two_sum sweeps; value unchanged, limbs nonoverlapping, and the
  // last limb carries the sum to within half an ulp of itself.
  void compress() {
    if (n <= 1) return;
    double g[Cap];
    int bottom = n - 1;
    double acc = q[bottom];
    for (int i = n - 2; i >= 0; --i) {
      const Dd s = fast_two_sum(acc, q[i]);
      acc = s.hi;
      if (s.lo != 0.0) {
        g[bottom--] = acc;
        acc = s.lo;
      }
    }
    g[bottom] = acc;
    int out = 0;
    double top = g[bottom];
    for (int i = bottom + 1; i < n; ++i) {
      const Dd s = fast_two_sum(g[i], top);
      top = s.hi;
      if (s.lo != 0.0) {
        assert(out < Cap);
        q[out++] = s.lo;
      }
    }
    assert(out < Cap);
    q[out++] = top;
    n = out;
  }

  // Sign of the exact value: the last limb dominates.
  int sign() const {
    if (n == 0) return 0;
    return q[n - 1] > 0.0 ? 1 : -1;
  }

  // Largest double <= the exact value; -0 is canonicalized to +0. Compresses
  // in place first so the leading limb is within half an ulp of the value.
  double round_down() {
    compress();
    if (n == 0) return 0.0;
    const double lead = q[n - 1];
    // Tail sign tells which side of the leading limb the exact value lies on;
    // within half an ulp there is no other double strictly between them.
    int tail = 0;
    if (n >= 2) tail = q[n - 2] > 0.0 ? 1 : -1;
    const double r =
        tail < 0 ? std::nextafter(lead, -std::numeric_limits<double>::infinity())
                 : lead;
    return r == 0.0 ? 0.0 : r;
  }
};

// Sign of a - b, exactly.
template <int C1, int C2>
inline int compare(const Exp<C1>& a, const Exp<C2>& b) {
  Exp<C1 + C2> d;
  d.clear();
  d.grow_exp(a);
  d.grow_exp_negated(b);
  return d.sign();
}

// Exact product of two dd values as an expansion.
inline Exp<8> mul_dd(const Dd& a, const Dd& b) {
  Exp<8> r;
  r.clear();
  const Dd ll = two_prod(a.lo, b.lo);
  r.grow_dd(ll);
  const Dd lh = two_prod(a.lo, b.hi);
  r.grow_dd(lh);
  const Dd hl = two_prod(a.hi, b.lo);
  r.grow_dd(hl);
  const Dd hh = two_prod(a.hi, b.hi);
  r.grow_dd(hh);
  return r;
}

// Sign of u1*v1 - u2*v2 for dd factors, exactly.
inline int orient(const Dd& u1, const Dd& v1, const Dd& u2, const Dd& v2) {
  return compare(mul_dd(u1, v1), mul_dd(u2, v2));
}

}  // namespace exact
}  // namespace bfm
