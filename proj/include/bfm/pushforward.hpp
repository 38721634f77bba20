#pragma once

// Transport maps from potentials and the pushforward of grid densities.
//
// A map stores per-node displacements, y(x) = x + displacement(x), with the
// target clamped into [0,1]^d when the map is built. Pushing a density splats
// each node's mass at its displaced position with multilinear weights into
// the surrounding cell corners, so total mass is conserved exactly and a node
// whose target is again a node coordinate deposits bitwise.

#include <array>
#include <cstddef>
#include <vector>

#include "bfm/cost.hpp"
#include "bfm/errors.hpp"
#include "bfm/grid.hpp"
#include "bfm/transforms.hpp"

namespace bfm {

enum class MapSource { mu_side, nu_side };

struct TransportMap {
  Grid grid;
  // displacement[a][node] = target coordinate minus node coordinate, axis a.
  std::array<std::vector<double>, 3> displacement;
  // Which marginal the map is meant to push.
  MapSource source = MapSource::mu_side;

  TransportMap() = default;
  explicit TransportMap(const Grid& g, MapSource s = MapSource::mu_side)
      : grid(g), source(s) {
    for (int a = 0; a < g.dim(); ++a) displacement[a].assign(g.size(), 0.0);
  }
};

inline TransportMap identity_map(const Grid& g) { return TransportMap(g); }

namespace detail {

struct AxisDeposit {
  int lo = 0;
  int hi = 0;
  double w_hi = 0.0;
};

// Cell of `x` in the ascending node table `c`, plus the weight of the upper
// node. Table lookups (not arithmetic on the spacing) so that a target equal
// to a node coordinate lands on that node with weight exactly 0 or 1.
inline AxisDeposit locate_cell(const std::vector<double>& c, double x) {
  const int n = static_cast<int>(c.size());
  if (x <= c[0]) return {0, 0, 0.0};
  if (x >= c[static_cast<std::size_t>(n - 1)]) return {n - 1, n - 1, 0.0};
  int i = static_cast<int>(x * n - 0.5);
  if (i < 0) i = 0;
  if (i > n - 2) i = n - 2;
  while (i + 1 < n - 1 && c[static_cast<std::size_t>(i + 1)] <= x) ++i;
  while (i > 0 && c[static_cast<std::size_t>(i)] > x) --i;
  const double lo = c[static_cast<std::size_t>(i)];
  const double hi = c[static_cast<std::size_t>(i + 1)];
  return {i, i + 1, (x - lo) / (hi - lo)};
}

}  // namespace detail

// T(x) = x - (grad h)^{-1}(grad psi(x)) for the potential psi living on the
// side being pushed (psi = phi^c when pushing mu). Centered differences give
// sub-cell displacements; the target is clamped into the box.
inline TransportMap map_from_conjugate(const CostModel& model, const Potential& psi,
                                       MapSource source = MapSource::mu_side) {
  const Grid& g = psi.grid;
  if (model.dim() != g.dim())
    throw GridMismatch("map_from_conjugate: cost dimension does not match grid");
  TransportMap map(g, source);
  const VectorField grad = gradient(psi);
  const int d = g.dim();
  std::array<std::vector<double>, 3> coords;
  for (int a = 0; a < d; ++a) coords[a] = g.axis_coords(a);
  detail::for_each_node(g, [&](std::size_t lin, int i0, int i1, int i2) {
    const int idx[3] = {i0, i1, i2};
    for (int a = 0; a < d; ++a) {
      const double x = coords[a][static_cast<std::size_t>(idx[a])];
      double t = x - model.inverse_gradient_component(a, grad.comp[a][lin]);
      if (t < 0.0) t = 0.0;
      if (t > 1.0) t = 1.0;
      map.displacement[a][lin] = t - x;
    }
  });
  return map;
}

// Map pushing mu, built from the nu-side potential phi: conjugates phi and
// differentiates the conjugate.
inline TransportMap build_map(const CostModel& model, const Potential& phi,
                              TransformWorkspace& ws,
                              MapSource source = MapSource::mu_side) {
  return map_from_conjugate(model, ctransform(model, phi, ws), source);
}

inline TransportMap build_map(const CostModel& model, const Potential& phi,
                              MapSource source = MapSource::mu_side) {
  TransformWorkspace ws(phi.grid);
  return build_map(model, phi, ws, source);
}

// Cell-quantized variant: y(x) is the grid node attaining the minimum inside
// the c-transform of phi. Coarser than the finite-difference map (targets
// move in whole cells); kept as an independent construction to cross-check
// build_map against.
inline TransportMap argmin_map(const CostModel& model, const Potential& phi,
                               TransformWorkspace& ws,
                               MapSource source = MapSource::mu_side) {
  const Grid& g = phi.grid;
  std::vector<std::size_t> nodes;
  ctransform_argmin(model, phi, ws, nodes);
  TransportMap map(g, source);
  const int d = g.dim();
  std::array<std::vector<double>, 3> coords;
  for (int a = 0; a < d; ++a) coords[a] = g.axis_coords(a);
  detail::for_each_node(g, [&](std::size_t lin, int i0, int i1, int i2) {
    const int idx[3] = {i0, i1, i2};
    std::size_t rest = nodes[lin];
    // Decompose the argmin's linear index, most significant axis first.
    for (int a = 0; a < d; ++a) {
      const std::size_t ya = rest / g.stride(a);
      rest -= ya * g.stride(a);
      map.displacement[a][lin] =
          coords[a][ya] - coords[a][static_cast<std::size_t>(idx[a])];
    }
  });
  return map;
}

namespace detail {

// Splats every source node's mass at x + scale * displacement(x). Deposits of
// one node sum to its mass exactly, so the total is conserved to rounding.
// scale = 0 lands on the node itself and scale = 1 on the full target, both
// bitwise: 0 * d contributes a signed zero and 1 * d is d.
inline DensityField splat_displaced(const TransportMap& map, const DensityField& mu,
                                    double scale) {
  detail::require_same_grid(map.grid, mu.grid, "pushforward_density");
  const Grid& g = mu.grid;
  const int d = g.dim();
  std::array<std::vector<double>, 3> coords;
  for (int a = 0; a < d; ++a) coords[a] = g.axis_coords(a);
  DensityField out(g);
  detail::for_each_node(g, [&](std::size_t lin, int i0, int i1, int i2) {
    const double m = mu.values[lin];
    if (m == 0.0) return;
    const int idx[3] = {i0, i1, i2};
    detail::AxisDeposit dep[3];
    for (int a = 0; a < d; ++a) {
      const double x = coords[a][static_cast<std::size_t>(idx[a])] +
                       scale * map.displacement[a][lin];
      dep[a] = detail::locate_cell(coords[a], x);
    }
    const int corners = 1 << d;
    for (int corner = 0; corner < corners; ++corner) {
      double w = m;
      std::size_t node = 0;
      for (int a = 0; a < d; ++a) {
        const bool up = (corner >> a) & 1;
        w *= up ? dep[a].w_hi : 1.0 - dep[a].w_hi;
        node += g.stride(a) * static_cast<std::size_t>(up ? dep[a].hi : dep[a].lo);
      }
      out.values[node] += w;
    }
  });
  return out;
}

}  // namespace detail

inline DensityField pushforward_density(const TransportMap& map, const DensityField& mu) {
  return detail::splat_displaced(map, mu, 1.0);
}

// Transport cost sum_x c(x, x + displacement(x)) mu(x) h^d of the map.
inline double primal_cost(const TransportMap& map, const DensityField& mu,
                          const CostModel& model) {
  detail::require_same_grid(map.grid, mu.grid, "primal_cost");
  if (model.dim() != map.grid.dim())
    throw GridMismatch("primal_cost: cost dimension does not match grid");
  const int d = map.grid.dim();
  detail::Compensated acc;
  for (std::size_t lin = 0; lin < mu.values.size(); ++lin) {
    const double m = mu.values[lin];
    if (m == 0.0) continue;
    double c = 0.0;
    for (int a = 0; a < d; ++a) c += model.axis_cost(a, map.displacement[a][lin]);
    acc.add(c * m);
  }
  return acc.sum * map.grid.cell_volume();
}

// J(phi) = integral of phi against nu plus integral of phi^c against mu.
inline double dual_value_J(const CostModel& model, const Potential& phi,
                           const DensityField& mu, const DensityField& nu,
                           TransformWorkspace& ws) {
  return integrate(phi, nu) + integrate(ctransform(model, phi, ws), mu);
}

inline double dual_value_J(const CostModel& model, const Potential& phi,
                           const DensityField& mu, const DensityField& nu) {
  TransformWorkspace ws(phi.grid);
  return dual_value_J(model, phi, mu, nu, ws);
}

// I(psi) = integral of psi against mu plus integral of psi^c against nu.
inline double dual_value_I(const CostModel& model, const Potential& psi,
                           const DensityField& mu, const DensityField& nu,
                           TransformWorkspace& ws) {
  return integrate(psi, mu) + integrate(ctransform(model, psi, ws), nu);
}

inline double dual_value_I(const CostModel& model, const Potential& psi,
                           const DensityField& mu, const DensityField& nu) {
  TransformWorkspace ws(psi.grid);
  return dual_value_I(model, psi, mu, nu, ws);
}

}  // namespace bfm
