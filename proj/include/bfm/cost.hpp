#pragma once

// Separable transport costs c(x,y) = h(y-x) = sum_i |y_i - x_i|^{p_i} / p_i
// with p_i > 1. The quadratic case (all p_i = 2) is flagged so callers can
// take the Legendre fast path; its axis cost is evaluated as 0.5*d*d, the one
// canonical expression shared with the brute-force oracles.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bfm/errors.hpp"

namespace bfm {

class CostModel {
 public:
  static CostModel quadratic(int dim) {
    if (dim < 1 || dim > 3) throw InvalidArgument("cost dimension must be 1..3");
    return CostModel(std::vector<double>(dim, 2.0));
  }

  static CostModel power(const std::vector<double>& exponents) {
    if (exponents.empty() || exponents.size() > 3)
      throw InvalidArgument("cost dimension must be 1..3");
    for (double p : exponents)
      if (!(p > 1.0)) throw InvalidArgument("cost exponents must satisfy p > 1");
    return CostModel(exponents);
  }

  int dim() const { return static_cast<int>(p_.size()); }
  bool is_quadratic() const { return quadratic_; }
  double exponent(int axis) const { return p_[axis]; }

  double axis_cost(int axis, double delta) const {
    const double p = p_[axis];
    if (p == 2.0) return 0.5 * delta * delta;
    return std::pow(std::fabs(delta), p) / p;
  }

  double cost(const double* x, const double* y) const {
    double acc = 0.0;
    for (int a = 0; a < dim(); ++a) acc += axis_cost(a, y[a] - x[a]);
    return acc;
  }

  // Component of grad h: sign(w) * |w|^(p-1).
  double gradient_component(int axis, double w) const {
    const double p = p_[axis];
    if (p == 2.0) return w;
    const double mag = std::pow(std::fabs(w), p - 1.0);
    return w < 0.0 ? -mag : mag;
  }

  // Component of (grad h)^{-1}: sign(v) * |v|^(1/(p-1)), magnitude capped at
  // sqrt(d). The cap keeps map displacements inside the domain diameter even
  // as p -> 1, where the exponent 1/(p-1) blows up.
  double inverse_gradient_component(int axis, double v) const {
    const double p = p_[axis];
    double mag;
    if (p == 2.0)
      mag = std::fabs(v);
    else
      mag = std::pow(std::fabs(v), 1.0 / (p - 1.0));
    if (!(mag < diameter_)) mag = diameter_;  // also catches overflow to inf
    return v < 0.0 ? -mag : mag;
  }

 private:
  explicit CostModel(std::vector<double> p) : p_(std::move(p)) {
    quadratic_ = true;
    for (double q : p_)
      if (q != 2.0) quadratic_ = false;
    diameter_ = std::sqrt(static_cast<double>(p_.size()));
  }

  std::vector<double> p_;
  bool quadratic_ = true;
  double diameter_ = 1.0;
};

// Parses "quadratic" or "power:p1,p2[,p3]" (one exponent per axis).
inline CostModel parse_cost_spec(const std::string& spec, int dim) {
  if (spec == "quadratic") return CostModel::quadratic(dim);
  const std::string prefix = "power:";
  if (spec.rfind(prefix, 0) != 0)
    throw InvalidArgument("unknown cost spec '" + spec +
                          "' (expected 'quadratic' or 'power:p1,p2[,p3]')");
  std::vector<double> ps;
  std::stringstream ss(spec.substr(prefix.size()));
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("cost spec: bad exponent '" + item + "'");
    }
    if (used != item.size())
      throw InvalidArgument("cost spec: bad exponent '" + item + "'");
    ps.push_back(v);
  }
  if (static_cast<int>(ps.size()) != dim)
    throw InvalidArgument("cost spec: expected one exponent per axis");
  return CostModel::power(ps);
}

}  // namespace bfm
