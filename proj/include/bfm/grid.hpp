#pragma once

// Cell-centered grids on [0,1]^d, d in {1,2,3}, with the scalar/vector fields
// and midpoint-rule calculus used throughout the solver. Node i of axis a sits
// at (i + 1/2) * spacing(a); every other translation unit obtains coordinates
// from Grid::coord so that exact-equality tests are meaningful.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "bfm/errors.hpp"

namespace bfm {

class Grid {
 public:
  Grid() = default;

  explicit Grid(const std::vector<int>& dims) { init(dims); }
  Grid(std::initializer_list<int> dims) { init(std::vector<int>(dims)); }

  int dim() const { return dim_; }
  int extent(int axis) const { return dims_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  double coord(int axis, int idx) const { return (idx + 0.5) * spacing_[axis]; }
  std::size_t size() const { return size_; }
  double cell_volume() const { return volume_; }
  std::size_t stride(int axis) const { return stride_[axis]; }

  std::size_t linear(std::array<int, 3> idx) const {
    std::size_t lin = 0;
    for (int a = 0; a < dim_; ++a) lin += static_cast<std::size_t>(idx[a]) * stride_[a];
    return lin;
  }
  std::size_t linear(int i0, int i1 = 0, int i2 = 0) const {
    return linear(std::array<int, 3>{i0, i1, i2});
  }

  std::vector<double> axis_coords(int axis) const {
    std::vector<double> c(dims_[axis]);
    for (int i = 0; i < dims_[axis]; ++i) c[i] = coord(axis, i);
    return c;
  }

  std::vector<int> extents() const {
    return std::vector<int>(dims_.begin(), dims_.begin() + dim_);
  }

  bool operator==(const Grid& o) const {
    if (dim_ != o.dim_) return false;
    for (int a = 0; a < dim_; ++a)
      if (dims_[a] != o.dims_[a]) return false;
    return true;
  }
  bool operator!=(const Grid& o) const { return !(*this == o); }

 private:
  void init(const std::vector<int>& dims) {
    if (dims.empty() || dims.size() > 3)
      throw InvalidArgument("grid dimension must be 1, 2, or 3");
    dim_ = static_cast<int>(dims.size());
    size_ = 1;
    volume_ = 1.0;
    for (int a = 0; a < dim_; ++a) {
      if (dims[a] < 2) throw InvalidArgument("grid extent must be at least 2");
      dims_[a] = dims[a];
      spacing_[a] = 1.0 / dims[a];
      size_ *= static_cast<std::size_t>(dims[a]);
      volume_ *= spacing_[a];
    }
    stride_[dim_ - 1] = 1;
    for (int a = dim_ - 2; a >= 0; --a)
      stride_[a] = stride_[a + 1] * static_cast<std::size_t>(dims_[a + 1]);
  }

  int dim_ = 0;
  std::array<int, 3> dims_{1, 1, 1};
  std::array<double, 3> spacing_{1.0, 1.0, 1.0};
  std::array<std::size_t, 3> stride_{0, 0, 0};
  std::size_t size_ = 0;
  double volume_ = 1.0;
};

struct ScalarField {
  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}

  Grid grid;
  std::vector<double> values;
};

// A potential phi/psi: plain scalar samples.
struct Potential : ScalarField {
  Potential() = default;
  explicit Potential(const Grid& g, double fill = 0.0) : ScalarField(g, fill) {}
};

// Nonnegative samples with unit total mass under the midpoint rule.
struct DensityField : ScalarField {
  DensityField() = default;
  explicit DensityField(const Grid& g, double fill = 0.0) : ScalarField(g, fill) {}
};

struct VectorField {
  VectorField() = default;
  explicit VectorField(const Grid& g) : grid(g) {
    for (int a = 0; a < g.dim(); ++a) comp[a].assign(g.size(), 0.0);
  }

  Grid grid;
  std::array<std::vector<double>, 3> comp;
};

namespace detail {

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (a != b) throw GridMismatch(std::string("grid mismatch in ") + what);
}

// Kahan accumulator; integrals must not drift at 512^2 / 128^3 node counts.
struct Compensated {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Visits all nodes as (linear index, per-axis indices).
template <class F>
inline void for_each_node(const Grid& g, F&& f) {
  const int d = g.dim();
  int n0 = g.extent(0);
  int n1 = d > 1 ? g.extent(1) : 1;
  int n2 = d > 2 ? g.extent(2) : 1;
  std::size_t lin = 0;
  for (int i0 = 0; i0 < n0; ++i0)
    for (int i1 = 0; i1 < n1; ++i1)
      for (int i2 = 0; i2 < n2; ++i2, ++lin) f(lin, i0, i1, i2);
}

}  // namespace detail

// Scales raw samples to unit mass under the midpoint rule.
inline DensityField normalize(const Grid& grid, const std::vector<double>& raw) {
  if (raw.size() != grid.size())
    throw GridMismatch("normalize: sample count does not match grid");
  detail::Compensated sum;
  for (double v : raw) {
    if (v < 0.0) throw NegativeInput("normalize: negative density sample");
    sum.add(v);
  }
  const double mass = sum.sum * grid.cell_volume();
  if (mass <= 0.0) throw AllZeroInput("normalize: density has zero total mass");
  DensityField out(grid);
  for (std::size_t i = 0; i < raw.size(); ++i) out.values[i] = raw[i] / mass;
  return out;
}

inline DensityField uniform_density(const Grid& grid) {
  return normalize(grid, std::vector<double>(grid.size(), 1.0));
}

// Midpoint-rule integral of f against the density w.
inline double integrate(const ScalarField& f, const DensityField& w) {
  detail::require_same_grid(f.grid, w.grid, "integrate");
  detail::Compensated acc;
  for (std::size_t i = 0; i < f.values.size(); ++i) acc.add(f.values[i] * w.values[i]);
  return acc.sum * f.grid.cell_volume();
}

// Midpoint-rule integral of plain samples (against Lebesgue measure).
inline double integrate(const ScalarField& f) {
  detail::Compensated acc;
  for (double v : f.values) acc.add(v);
  return acc.sum * f.grid.cell_volume();
}

// Centered differences in the interior, one-sided first-order at the ends.
inline VectorField gradient(const ScalarField& f) {
  const Grid& g = f.grid;
  VectorField out(g);
  for (int a = 0; a < g.dim(); ++a) {
    const std::size_t s = g.stride(a);
    const int n = g.extent(a);
    const double inv_h = static_cast<double>(n);
    const double inv_2h = 0.5 * inv_h;
    double* dst = out.comp[a].data();
    const double* src = f.values.data();
    detail::for_each_node(g, [&](std::size_t lin, int i0, int i1, int i2) {
      const int idx[3] = {i0, i1, i2};
      const int j = idx[a];
      if (j == 0)
        dst[lin] = (src[lin + s] - src[lin]) * inv_h;
      else if (j == n - 1)
        dst[lin] = (src[lin] - src[lin - s]) * inv_h;
      else
        dst[lin] = (src[lin + s] - src[lin - s]) * inv_2h;
    });
  }
  return out;
}

}  // namespace bfm
