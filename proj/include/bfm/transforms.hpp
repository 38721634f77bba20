#pragma once

// Fast discrete c-transforms on grid lines plus the d-dimensional driver.
//
// Value semantics: each output is the exact extremum of its candidate
// expressions, rounded once toward -infinity. Candidates are kept as exact
// floating-point expansions, including the partial minima that flow between
// axis passes, so the d-dimensional result is itself an exactly-rounded
// global minimum. That single downward rounding is what makes the conjugacy
// laws hold bitwise: phi^c must sit weakly below every candidate as a real
// number, which nearest-rounded evaluation cannot promise.
//
// legendre_1d: O(n + m) conjugate via the lower convex hull and a monotone
// value sweep, with exact turn predicates. c-transform lines use an
// O((n + m) log m) divide and conquer over query parity: the pair costs are
// strictly Monge (cross gaps of order h^p dwarf one ulp of the cost values),
// so smallest-index minimizers are monotone and the parity windows are valid.
// Ties resolve to the smaller node index, matching a left-to-right scan.
//
// For quadratic costs the transform collapses to conjugation with the product
// kernel, phi^c(x) = |x|^2/2 - (|.|^2/2 - phi)*(x), evaluated as one exact
// chain so the laws above survive the shortcut unchanged.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bfm/cost.hpp"
#include "bfm/errors.hpp"
#include "bfm/exact.hpp"
#include "bfm/grid.hpp"
#include "bfm/threading.hpp"

namespace bfm {

struct LineScratch {
  std::vector<double> f;
  std::vector<double> out;
  std::vector<int> arg;
  std::vector<int> hull;
  std::vector<double> in_limbs;
  std::vector<unsigned char> in_len;
  std::vector<double> in_lead;
  std::vector<double> out_limbs;
  std::vector<unsigned char> out_len;
  std::vector<double> out_lead;
};

namespace detail {

constexpr int kMaxLimbs = 16;

// SoA view over one gathered line of expansions: limbs[j*cap .. j*cap+len[j]).
struct ExpLine {
  double* limbs;
  unsigned char* len;
  double* lead;
  int cap;
};

// Per-node state of a multi-axis transform between passes.
struct StateField {
  std::vector<double> limbs;
  std::vector<unsigned char> len;
  std::vector<double> lead;
  int cap = 0;

  void init(std::size_t nodes, int c) {
    cap = c;
    limbs.resize(nodes * static_cast<std::size_t>(c));
    len.resize(nodes);
    lead.resize(nodes);
  }
};

// The filter prunes candidate comparisons on their leading doubles; the bound
// covers the sub-leading limbs (below one ulp of the lead after compression)
// plus the two additions assembling the approximation. Near ties fall through
// to the exact comparison, so the filter affects speed only.
constexpr double kFilterEps = 0x1p-48;
constexpr double kFilterAbs = 1e-280;

template <int Cap>
inline void build_candidate(const exact::Dd& g, double bias, const double* limbs,
                            int len, exact::Exp<Cap>& out) {
  out.load(limbs, len);
  out.grow(bias);
  out.grow(g.lo);
  out.grow(g.hi);
}

// out[k] = min_j (gen(k, j) + bias[j] + in[j]) as an exact expansion, with the
// smallest attaining j in argmin[k]. gen must be strictly Monge so that
// smallest-index minimizers are monotone; the parity recursion then bounds
// every scan by the argmins of the two enclosing solved queries.
template <class Gen>
inline void exact_min_line(Gen&& gen, const double* bias, int n, int m,
                           const ExpLine& in, const ExpLine& out, int* argmin) {
  exact::Exp<kMaxLimbs> best, cand;
  auto scan = [&](int k, int lo, int hi) {
    double best_approx = 0.0, best_mag = 0.0;
    int best_arg = -1;
    for (int j = lo; j <= hi; ++j) {
      const exact::Dd g = gen(k, j);
      const double bj = bias ? bias[j] : 0.0;
      const double approx = g.hi + bj + in.lead[j];
      const double mag = std::fabs(g.hi) + std::fabs(bj) + std::fabs(in.lead[j]);
      if (best_arg >= 0) {
        const double margin = kFilterEps * (mag + best_mag) + kFilterAbs;
        const double diff = approx - best_approx;
        if (diff > margin) continue;
        if (diff >= -margin) {
          build_candidate(g, bj, in.limbs + static_cast<std::size_t>(j) * in.cap,
                          in.len[j], cand);
          if (exact::compare(cand, best) >= 0) continue;
          best = cand;
          best_approx = approx;
          best_mag = mag;
          best_arg = j;
          continue;
        }
      }
      build_candidate(g, bj, in.limbs + static_cast<std::size_t>(j) * in.cap,
                      in.len[j], best);
      best_approx = approx;
      best_mag = mag;
      best_arg = j;
    }
    best.compress();
    assert(best.n <= out.cap);
    out.len[k] = static_cast<unsigned char>(best.n);
    out.lead[k] = best.n ? best.q[best.n - 1] : 0.0;
    for (int t = 0; t < best.n; ++t)
      out.limbs[static_cast<std::size_t>(k) * out.cap + t] = best.q[t];
    argmin[k] = best_arg;
  };
  scan(0, 0, n - 1);
  if (m == 1) return;
  int top = 1;
  while (top < m) top <<= 1;
  for (int s = top; s >= 1; s >>= 1)
    for (int k = s; k < m; k += 2 * s)
      scan(k, argmin[k - s], k + s < m ? argmin[k + s] : n - 1);
}

}  // namespace detail

// out[k] = max_j (x[k]*y[j] - f[j]) rounded down; y and x ascending.
inline void legendre_1d(const double* y, const double* f, int n, const double* x,
                        int m, double* out, LineScratch& ws) {
  if (n <= 0 || m <= 0) return;
  ws.hull.resize(static_cast<std::size_t>(n));
  int* hull = ws.hull.data();
  int hn = 0;
  for (int j = 0; j < n; ++j) {
    // Keep hull slopes strictly increasing; collinear middles are dropped.
    while (hn >= 2) {
      const int a = hull[hn - 2], b = hull[hn - 1];
      const exact::Dd dfb = exact::two_diff(f[b], f[a]);
      const exact::Dd dyj = exact::two_diff(y[j], y[b]);
      const exact::Dd dfj = exact::two_diff(f[j], f[b]);
      const exact::Dd dya = exact::two_diff(y[b], y[a]);
      if (exact::orient(dfb, dyj, dfj, dya) < 0) break;
      --hn;
    }
    hull[hn++] = j;
  }
  // Values along the hull are concave in the vertex index, so for ascending
  // queries one pointer that only moves right finds every maximum.
  int i = 0;
  exact::Exp<4> cur, nxt;
  for (int k = 0; k < m; ++k) {
    const double xv = x[k];
    auto candidate = [&](int idx, exact::Exp<4>& e) {
      e.clear();
      e.grow(-f[hull[idx]]);
      e.grow_dd(exact::two_prod(xv, y[hull[idx]]));
    };
    candidate(i, cur);
    while (i + 1 < hn) {
      candidate(i + 1, nxt);
      if (exact::compare(nxt, cur) > 0) {
        cur = nxt;
        ++i;
      } else {
        break;
      }
    }
    out[k] = cur.round_down();
  }
}

// out[k] = min_j (h(y[j]-x[k]) - f[j]) rounded down, for strictly convex h;
// argmin holds the smallest attaining j.
template <class H>
inline void ctransform_1d(H&& h, const double* y, const double* f, int n,
                          const double* x, int m, double* out, int* argmin) {
  if (n <= 0 || m <= 0) return;
  std::vector<double> in_limbs(static_cast<std::size_t>(n));
  std::vector<unsigned char> in_len(static_cast<std::size_t>(n));
  std::vector<double> in_lead(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double v = f[j];
    if (v != 0.0) {
      in_limbs[static_cast<std::size_t>(j)] = -v;
      in_len[static_cast<std::size_t>(j)] = 1;
      in_lead[static_cast<std::size_t>(j)] = -v;
    } else {
      in_len[static_cast<std::size_t>(j)] = 0;
      in_lead[static_cast<std::size_t>(j)] = 0.0;
    }
  }
  std::vector<double> out_limbs(static_cast<std::size_t>(m) * 3);
  std::vector<unsigned char> out_len(static_cast<std::size_t>(m));
  std::vector<double> out_lead(static_cast<std::size_t>(m));
  detail::ExpLine li{in_limbs.data(), in_len.data(), in_lead.data(), 1};
  detail::ExpLine lo{out_limbs.data(), out_len.data(), out_lead.data(), 3};
  detail::exact_min_line(
      [&](int k, int j) { return exact::Dd{h(y[j] - x[k]), 0.0}; }, nullptr, n, m,
      li, lo, argmin);
  exact::Exp<4> e;
  for (int k = 0; k < m; ++k) {
    e.load(out_limbs.data() + static_cast<std::size_t>(k) * 3, out_len[static_cast<std::size_t>(k)]);
    out[k] = e.round_down();
  }
}

enum class CtransformPath { automatic, divide_and_conquer };

class TransformWorkspace {
 public:
  explicit TransformWorkspace(const Grid& grid, int threads = 1)
      : grid_(grid),
        threads_(std::max(1, threads)),
        scratch_(static_cast<std::size_t>(std::max(1, threads))) {
    for (int a = 0; a < grid.dim(); ++a) coords_[a] = grid.axis_coords(a);
  }

  const Grid& grid() const { return grid_; }
  int threads() const { return threads_; }
  const std::vector<double>& coords(int axis) const { return coords_[axis]; }
  LineScratch& scratch(int t) { return scratch_[static_cast<std::size_t>(t)]; }

  // 0.5*c*c sampled along one axis, built on first use.
  const std::vector<double>& half_sq_axis(int axis) {
    auto& hs = half_sq_[axis];
    if (hs.empty()) {
      const auto& c = coords_[axis];
      hs.resize(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) hs[i] = 0.5 * c[i] * c[i];
    }
    return hs;
  }

  // Linear offsets of the first node of every line along `axis`.
  const std::vector<std::size_t>& line_bases(int axis) {
    auto& bases = bases_[axis];
    if (bases.empty()) {
      std::array<int, 3> n{1, 1, 1};
      for (int a = 0; a < grid_.dim(); ++a) n[a] = grid_.extent(a);
      n[axis] = 1;
      for (int i0 = 0; i0 < n[0]; ++i0)
        for (int i1 = 0; i1 < n[1]; ++i1)
          for (int i2 = 0; i2 < n[2]; ++i2)
            bases.push_back(grid_.linear({i0, i1, i2}));
    }
    return bases;
  }

  detail::StateField& state(int which) { return state_[which]; }

 private:
  Grid grid_;
  int threads_;
  std::array<std::vector<double>, 3> coords_;
  std::vector<LineScratch> scratch_;
  std::array<std::vector<double>, 3> half_sq_;
  std::array<std::vector<std::size_t>, 3> bases_;
  detail::StateField state_[2];
};

namespace detail {

// One exact axis pass: gathers the strided per-node expansions into line
// buffers, runs the min kernel, and scatters results (and argmins) back.
template <class GenFactory>
inline void exact_axis_pass(TransformWorkspace& ws, int axis, const StateField& in,
                            StateField& out, const double* bias,
                            std::vector<int>* arg_field, GenFactory&& gen_factory) {
  const Grid& g = ws.grid();
  const auto& bases = ws.line_bases(axis);
  const std::size_t stride = g.stride(axis);
  const int n = g.extent(axis);
  parallel_chunks(ws.threads(), bases.size(), [&](int t, std::size_t lo, std::size_t hi) {
    LineScratch& sc = ws.scratch(t);
    sc.in_limbs.resize(static_cast<std::size_t>(n) * in.cap);
    sc.in_len.resize(static_cast<std::size_t>(n));
    sc.in_lead.resize(static_cast<std::size_t>(n));
    sc.out_limbs.resize(static_cast<std::size_t>(n) * out.cap);
    sc.out_len.resize(static_cast<std::size_t>(n));
    sc.out_lead.resize(static_cast<std::size_t>(n));
    sc.arg.resize(static_cast<std::size_t>(n));
    ExpLine li{sc.in_limbs.data(), sc.in_len.data(), sc.in_lead.data(), in.cap};
    ExpLine lo_{sc.out_limbs.data(), sc.out_len.data(), sc.out_lead.data(), out.cap};
    auto gen = gen_factory();
    for (std::size_t l = lo; l < hi; ++l) {
      const std::size_t base = bases[l];
      for (int j = 0; j < n; ++j) {
        const std::size_t node = base + static_cast<std::size_t>(j) * stride;
        const int L = in.len[node];
        sc.in_len[static_cast<std::size_t>(j)] = static_cast<unsigned char>(L);
        sc.in_lead[static_cast<std::size_t>(j)] = in.lead[node];
        for (int s = 0; s < L; ++s)
          sc.in_limbs[static_cast<std::size_t>(j) * in.cap + s] =
              in.limbs[node * static_cast<std::size_t>(in.cap) + s];
      }
      exact_min_line(gen, bias, n, n, li, lo_, sc.arg.data());
      for (int k = 0; k < n; ++k) {
        const std::size_t node = base + static_cast<std::size_t>(k) * stride;
        const int L = sc.out_len[static_cast<std::size_t>(k)];
        out.len[node] = static_cast<unsigned char>(L);
        out.lead[node] = sc.out_lead[static_cast<std::size_t>(k)];
        for (int s = 0; s < L; ++s)
          out.limbs[node * static_cast<std::size_t>(out.cap) + s] =
              sc.out_limbs[static_cast<std::size_t>(k) * out.cap + s];
        if (arg_field) (*arg_field)[node] = sc.arg[static_cast<std::size_t>(k)];
      }
    }
  });
}

// Shared driver: runs all axis passes of phi^c(x) = min_y c(x,y) - phi(y),
// leaving the exact per-node minima in ws.state(...). Returns which state
// holds the result. The quadratic shortcut accumulates the product kernel
// -x_a*y_a with the source-side half squares as bias; the query-side half
// squares are added by the caller before rounding.
inline int ctransform_passes(const CostModel& model, const Potential& phi,
                             TransformWorkspace& ws, bool shortcut,
                             std::array<std::vector<int>, 3>* pass_arg) {
  const Grid& g = phi.grid;
  const std::size_t nodes = g.size();
  const int d = g.dim();
  const int step = shortcut ? 3 : 2;
  int cur = 0;
  ws.state(cur).init(nodes, 1);
  {
    StateField& s = ws.state(cur);
    for (std::size_t i = 0; i < nodes; ++i) {
      const double v = phi.values[i];
      if (v != 0.0) {
        s.limbs[i] = -v;
        s.len[i] = 1;
        s.lead[i] = -v;
      } else {
        s.len[i] = 0;
        s.lead[i] = 0.0;
      }
    }
  }
  for (int a = 0; a < d; ++a) {
    const int nxt = 1 - cur;
    ws.state(nxt).init(nodes, ws.state(cur).cap + step);
    const double* axis_nodes = ws.coords(a).data();
    std::vector<int>* arg = pass_arg ? &(*pass_arg)[a] : nullptr;
    if (arg) arg->assign(nodes, 0);
    if (shortcut) {
      const double* bias = ws.half_sq_axis(a).data();
      exact_axis_pass(ws, a, ws.state(cur), ws.state(nxt), bias, arg,
                      [axis_nodes]() {
                        return [axis_nodes](int k, int j) {
                          const exact::Dd p = exact::two_prod(axis_nodes[k], axis_nodes[j]);
                          return exact::Dd{-p.hi, -p.lo};
                        };
                      });
    } else {
      const CostModel* m = &model;
      const int axis = a;
      exact_axis_pass(ws, a, ws.state(cur), ws.state(nxt), nullptr, arg,
                      [axis_nodes, m, axis]() {
                        return [axis_nodes, m, axis](int k, int j) {
                          return exact::Dd{m->axis_cost(axis, axis_nodes[j] - axis_nodes[k]), 0.0};
                        };
                      });
    }
    cur = nxt;
  }
  return cur;
}

}  // namespace detail

// phi^c(x) = min_y c(x,y) - phi(y) over the grid nodes, rounded down.
inline Potential ctransform(const CostModel& model, const Potential& phi,
                            TransformWorkspace& ws,
                            CtransformPath path = CtransformPath::automatic) {
  const Grid& g = phi.grid;
  if (model.dim() != g.dim())
    throw GridMismatch("ctransform: cost dimension does not match grid");
  if (ws.grid() != g)
    throw GridMismatch("ctransform: workspace built for a different grid");
  const bool shortcut = model.is_quadratic() && path == CtransformPath::automatic;
  const int fin = detail::ctransform_passes(model, phi, ws, shortcut, nullptr);
  Potential out(g);
  detail::StateField& s = ws.state(fin);
  if (shortcut) {
    std::array<const double*, 3> hs{nullptr, nullptr, nullptr};
    for (int a = 0; a < g.dim(); ++a) hs[a] = ws.half_sq_axis(a).data();
    const int d = g.dim();
    detail::for_each_node(g, [&](std::size_t lin, int i0, int i1, int i2) {
      const int idx[3] = {i0, i1, i2};
      exact::Exp<detail::kMaxLimbs> e;
      e.load(s.limbs.data() + lin * static_cast<std::size_t>(s.cap), s.len[lin]);
      for (int a = 0; a < d; ++a) e.grow(hs[a][idx[a]]);
      out.values[lin] = e.round_down();
    });
  } else {
    exact::Exp<detail::kMaxLimbs> e;
    for (std::size_t i = 0; i < g.size(); ++i) {
      e.load(s.limbs.data() + i * static_cast<std::size_t>(s.cap), s.len[i]);
      out.values[i] = e.round_down();
    }
  }
  return out;
}

inline Potential ctransform(const CostModel& model, const Potential& phi) {
  TransformWorkspace ws(phi.grid);
  return ctransform(model, phi, ws);
}

// phi^c together with, per node x, the linear index of a grid node y attaining
// min_y c(x,y) - phi(y). Axis pass a stores its line argmins indexed by
// (x_0..x_a, y_{a+1}..); substituting from the last axis backwards walks the
// nested minimizations down to the joint one. Always takes the divide and
// conquer path, so values match ctransform with that path bitwise.
inline Potential ctransform_argmin(const CostModel& model, const Potential& phi,
                                   TransformWorkspace& ws,
                                   std::vector<std::size_t>& argmin_node) {
  const Grid& g = phi.grid;
  if (model.dim() != g.dim())
    throw GridMismatch("ctransform_argmin: cost dimension does not match grid");
  if (ws.grid() != g)
    throw GridMismatch("ctransform_argmin: workspace built for a different grid");
  std::array<std::vector<int>, 3> pass_arg;
  const int fin = detail::ctransform_passes(model, phi, ws, false, &pass_arg);
  Potential out(g);
  detail::StateField& s = ws.state(fin);
  exact::Exp<detail::kMaxLimbs> e;
  for (std::size_t i = 0; i < g.size(); ++i) {
    e.load(s.limbs.data() + i * static_cast<std::size_t>(s.cap), s.len[i]);
    out.values[i] = e.round_down();
  }
  argmin_node.assign(g.size(), 0);
  const int d = g.dim();
  detail::for_each_node(g, [&](std::size_t lin, int i0, int i1, int i2) {
    int idx[3] = {i0, i1, i2};
    std::size_t cur = lin;
    for (int a = d - 1; a >= 0; --a) {
      const int ya = pass_arg[a][cur];
      cur = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(cur) +
                                     static_cast<std::ptrdiff_t>(ya - idx[a]) *
                                         static_cast<std::ptrdiff_t>(g.stride(a)));
      idx[a] = ya;
    }
    argmin_node[lin] = cur;
  });
  return out;
}

// phi^cc, the c-concave envelope of phi.
inline Potential double_ctransform(const CostModel& model, const Potential& phi,
                                   TransformWorkspace& ws,
                                   CtransformPath path = CtransformPath::automatic) {
  Potential mid = ctransform(model, phi, ws, path);
  return ctransform(model, mid, ws, path);
}

inline Potential double_ctransform(const CostModel& model, const Potential& phi) {
  TransformWorkspace ws(phi.grid);
  return double_ctransform(model, phi, ws);
}

}  // namespace bfm
