#pragma once

// Back-and-forth dual ascent for optimal transport between grid densities.
//
// Each iteration lifts J(phi) along the H^1-dot gradient, re-centres with a
// c-transform, then does the mirrored ascent on I(psi). The conjugations make
// the dual pair value non-decreasing across them, which is asserted; the
// gradient half-steps are controlled by the adaptive step size below. The
// plain gradient-ascent mode keeps only the phi ascent plus a c-concave
// projection and serves as a baseline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bfm/cost.hpp"
#include "bfm/errors.hpp"
#include "bfm/grid.hpp"
#include "bfm/poisson.hpp"
#include "bfm/pushforward.hpp"
#include "bfm/threading.hpp"
#include "bfm/transforms.hpp"

namespace bfm {

enum class SolverMode { back_and_forth, gradient_ascent };

enum class Termination { tolerance_met, max_iterations, dual_stalled, cost_target_met };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::tolerance_met: return "tolerance_met";
    case Termination::max_iterations: return "max_iterations";
    case Termination::dual_stalled: return "dual_stalled";
    case Termination::cost_target_met: return "cost_target_met";
  }
  return "unknown";
}

struct SolverConfig {
  SolverMode mode = SolverMode::back_and_forth;
  // Stop once the H^-1-dot norm of nu minus the pushforward of mu is at or
  // below this; negative disables the check.
  double tolerance = 1e-4;
  int max_iterations = 2000;
  int threads = 0;  // 0 = hardware concurrency
  double sigma_init = 0.0;  // 0 = 8 / max(sup mu, sup nu)
  double sigma_min = 0.01;
  double beta_1 = 0.25;
  double beta_2 = 0.75;
  double alpha_1 = 1.25;
  double alpha_2 = 0.8;
  // Stop once |dual - exact_cost| <= exact_tolerance (for instances whose
  // transport cost is known in closed form). Requires exact_tolerance > 0.
  std::optional<double> exact_cost;
  double exact_tolerance = 0.0;
};

// Keeps the realized increase of a gradient half-step inside
// [beta_1 * sigma * |g|^2, beta_2 * sigma * |g|^2]: shrink by alpha_2 below
// the window, grow by alpha_1 above it, never below sigma_min.
inline double update_sigma(double sigma, double increase, double grad_norm_sq,
                           const SolverConfig& config = {}) {
  const double predicted = sigma * grad_norm_sq;
  if (increase < config.beta_1 * predicted)
    sigma *= config.alpha_2;
  else if (increase > config.beta_2 * predicted)
    sigma *= config.alpha_1;
  return std::max(sigma, config.sigma_min);
}

struct IterationStats {
  int iteration = 0;  // 1-based
  double residual = 0.0;  // H^-1-dot mismatch norm at entry
  double dual_value = 0.0;  // pair value after the iteration
  double sigma_first = 0.0;
  double sigma_second = 0.0;  // stays 0 in gradient_ascent mode
  double grad_norm_sq_first = 0.0;
  double grad_norm_sq_second = 0.0;
  double increase_first = 0.0;
  double increase_second = 0.0;
};

struct SolveReport {
  Termination termination = Termination::max_iterations;
  int iterations = 0;
  double dual_value = 0.0;
  double primal_cost = 0.0;
  double residual = 0.0;
  double wall_seconds = 0.0;
  std::vector<IterationStats> trace;
  Potential phi;  // zero-mean gauge
  Potential psi;
  TransportMap map;  // pushes mu onto nu
};

namespace detail {

inline void check_density(const char* name, const DensityField& f) {
  for (double v : f.values) {
    if (!std::isfinite(v))
      throw InfeasibleInput(std::string(name) + ": density has a non-finite sample");
    if (v < 0.0)
      throw NegativeInput(std::string(name) + ": density has a negative sample");
  }
  const double mass = integrate(f);
  if (std::abs(mass - 1.0) > 1e-6)
    throw InfeasibleInput(std::string(name) + ": density mass " + std::to_string(mass) +
                          " is not 1; normalize inputs first");
}

inline void check_config(const SolverConfig& c) {
  if (c.max_iterations < 0) throw InvalidArgument("solve: max_iterations is negative");
  if (c.threads < 0) throw InvalidArgument("solve: threads is negative");
  if (c.sigma_init < 0.0) throw InvalidArgument("solve: sigma_init is negative");
  if (c.sigma_min <= 0.0) throw InvalidArgument("solve: sigma_min must be positive");
  if (!(c.beta_1 > 0.0) || !(c.beta_1 < c.beta_2) || !(c.beta_2 < 1.0))
    throw InvalidArgument("solve: need 0 < beta_1 < beta_2 < 1");
  if (!(c.alpha_2 < 1.0) || !(c.alpha_2 > 0.0) || !(c.alpha_1 > 1.0))
    throw InvalidArgument("solve: need 0 < alpha_2 < 1 < alpha_1");
  if (c.exact_tolerance < 0.0) throw InvalidArgument("solve: exact_tolerance is negative");
}

// Runs every input check before any member that plans FFTs or allocates
// scratch is built; returns the common grid.
inline const Grid& checked_solver_inputs(const CostModel& model, const DensityField& mu,
                                         const DensityField& nu,
                                         const SolverConfig& config) {
  require_same_grid(mu.grid, nu.grid, "solve");
  if (model.dim() != mu.grid.dim())
    throw GridMismatch("solve: cost dimension does not match grid");
  check_config(config);
  check_density("mu", mu);
  check_density("nu", nu);
  return mu.grid;
}

}  // namespace detail

class Solver {
 public:
  Solver(const CostModel& model, const DensityField& mu, const DensityField& nu,
         const SolverConfig& config = {})
      : model_(model),
        config_(config),
        grid_(detail::checked_solver_inputs(model, mu, nu, config)),
        mu_(mu),
        nu_(nu),
        ws_(mu.grid, config.threads > 0 ? config.threads : default_thread_count()),
        plan_(mu.grid),
        phi_(mu.grid),
        psi_(mu.grid),
        start_(std::chrono::steady_clock::now()) {
    double sup = 0.0;
    for (double v : mu.values) sup = std::max(sup, v);
    for (double v : nu.values) sup = std::max(sup, v);
    sigma_ = config.sigma_init > 0.0 ? config.sigma_init : 8.0 / sup;
    // pair(0, 0) = 0; phi = psi = 0 is a valid starting pair for any cost
    // with h >= 0 and h(0) = 0, since then 0^c = 0 on the nodes.
    last_pair_ = 0.0;
  }

  int iteration() const { return iteration_; }
  double sigma() const { return sigma_; }
  const Potential& phi() const { return phi_; }
  const Potential& psi() const { return psi_; }
  const std::vector<IterationStats>& trace() const { return trace_; }

  // Dual pair value of the current iterate. For back_and_forth this refreshes
  // psi = phi^c first (the start of an iteration), so calling it never skews
  // a subsequent step().
  double dual_value() {
    ensure_probe();
    return probe_.dual;
  }

  double residual() {
    ensure_probe();
    return std::sqrt(std::max(probe_.gn, 0.0));
  }

  // One full iteration; returns its stats (also appended to the trace).
  IterationStats step() {
    ensure_probe();
    IterationStats st;
    st.iteration = iteration_ + 1;
    st.residual = std::sqrt(std::max(probe_.gn, 0.0));
    if (config_.mode == SolverMode::back_and_forth)
      step_back_and_forth(st);
    else
      step_gradient_ascent(st);
    probe_.fresh = false;
    ++iteration_;
    if (std::abs(st.dual_value - prev_dual_) < kStallEps)
      ++stall_;
    else
      stall_ = 0;
    prev_dual_ = st.dual_value;
    trace_.push_back(st);
    return st;
  }

  // Iterates until a stopping rule fires. The solver stays usable afterwards
  // (the report holds copies), so extra steps can probe the converged state.
  SolveReport run() {
    while (true) {
      ensure_probe();
      const double residual = std::sqrt(std::max(probe_.gn, 0.0));
      if (config_.tolerance >= 0.0 && residual <= config_.tolerance)
        return finish(Termination::tolerance_met, residual);
      if (config_.exact_cost && config_.exact_tolerance > 0.0 &&
          std::abs(probe_.dual - *config_.exact_cost) <= config_.exact_tolerance)
        return finish(Termination::cost_target_met, residual);
      if (iteration_ >= config_.max_iterations)
        return finish(Termination::max_iterations, residual);
      if (stall_ >= kStallLimit)
        return finish(Termination::dual_stalled, residual);
      step();
    }
  }

 private:
  static constexpr double kMonotoneSlack = 1e-10;
  static constexpr double kStallEps = 1e-12;
  static constexpr int kStallLimit = 10;

  struct Probe {
    double dual = 0.0;
    double gn = 0.0;
    Potential dir;
    bool fresh = false;
  };

  double pair_value() const { return integrate(phi_, nu_) + integrate(psi_, mu_); }

  // H^1-dot ascent direction for the potential whose side is being pushed:
  // solve -lap dir = target - pushforward(source); gn is the squared
  // H^-1-dot norm of the mismatch, <r, dir> under the grid quadrature.
  std::pair<Potential, double> ascent_direction(const Potential& u,
                                                const DensityField& source,
                                                const DensityField& target,
                                                MapSource side) {
    const TransportMap map = map_from_conjugate(model_, u, side);
    const DensityField rho = pushforward_density(map, source);
    ScalarField r(grid_);
    for (std::size_t i = 0; i < r.values.size(); ++i)
      r.values[i] = target.values[i] - rho.values[i];
    Potential dir = plan_.solve_neumann(r);
    detail::Compensated acc;
    for (std::size_t i = 0; i < r.values.size(); ++i)
      acc.add(r.values[i] * dir.values[i]);
    const double gn = acc.sum * grid_.cell_volume();
    return {std::move(dir), gn};
  }

  // Start-of-iteration work shared by the stopping rules and step(): restore
  // psi = phi^c (back_and_forth), then the mu-side direction and residual.
  void ensure_probe() {
    if (probe_.fresh) return;
    if (config_.mode == SolverMode::back_and_forth) {
      psi_ = ctransform(model_, phi_, ws_);
      const double v = pair_value();
      if (v < last_pair_ - kMonotoneSlack)
        throw NumericalBlowup("solve: conjugation decreased the dual pair value");
      last_pair_ = v;
      probe_.dual = v;
    } else {
      probe_.dual = last_pair_;
    }
    auto [dir, gn] = ascent_direction(psi_, mu_, nu_, MapSource::mu_side);
    probe_.dir = std::move(dir);
    probe_.gn = gn;
    probe_.fresh = true;
  }

  void axpy(Potential& u, double s, const Potential& dir) {
    for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] += s * dir.values[i];
  }

  void step_back_and_forth(IterationStats& st) {
    const double v2 = probe_.dual;
    st.sigma_first = sigma_;
    st.grad_norm_sq_first = probe_.gn;
    axpy(phi_, sigma_, probe_.dir);
    psi_ = ctransform(model_, phi_, ws_);
    const double v3 = pair_value();
    st.increase_first = v3 - v2;
    sigma_ = update_sigma(sigma_, st.increase_first, probe_.gn, config_);

    phi_ = ctransform(model_, psi_, ws_);
    const double v4 = pair_value();
    if (v4 < v3 - kMonotoneSlack)
      throw NumericalBlowup("solve: conjugation decreased the dual pair value");
    auto [dir2, gn2] = ascent_direction(phi_, nu_, mu_, MapSource::nu_side);
    st.sigma_second = sigma_;
    st.grad_norm_sq_second = gn2;
    axpy(psi_, sigma_, dir2);
    phi_ = ctransform(model_, psi_, ws_);
    const double v5 = pair_value();
    st.increase_second = v5 - v4;
    sigma_ = update_sigma(sigma_, st.increase_second, gn2, config_);
    st.dual_value = v5;
    last_pair_ = v5;
  }

  void step_gradient_ascent(IterationStats& st) {
    const double v1 = probe_.dual;
    st.sigma_first = sigma_;
    st.grad_norm_sq_first = probe_.gn;
    axpy(phi_, sigma_, probe_.dir);
    psi_ = ctransform(model_, phi_, ws_);
    const double v2 = pair_value();
    st.increase_first = v2 - v1;
    sigma_ = update_sigma(sigma_, st.increase_first, probe_.gn, config_);
    // c-concave projection phi <- phi^cc; psi is already phi^c.
    phi_ = ctransform(model_, psi_, ws_);
    const double v3 = pair_value();
    if (v3 < v2 - kMonotoneSlack)
      throw NumericalBlowup("solve: conjugation decreased the dual pair value");
    st.dual_value = v3;
    last_pair_ = v3;
  }

  SolveReport finish(Termination t, double residual) {
    SolveReport rep;
    rep.termination = t;
    rep.iterations = iteration_;
    rep.dual_value = probe_.dual;
    rep.residual = residual;
    rep.trace = trace_;
    rep.phi = phi_;
    rep.psi = psi_;
    // Fix the additive gauge: the pair value is invariant under
    // (phi - s, psi + s) because the marginals share total mass.
    const double shift = integrate(rep.phi);
    for (double& v : rep.phi.values) v -= shift;
    for (double& v : rep.psi.values) v += shift;
    rep.map = map_from_conjugate(model_, rep.psi, MapSource::mu_side);
    rep.primal_cost = primal_cost(rep.map, mu_, model_);
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return rep;
  }

  CostModel model_;
  SolverConfig config_;
  Grid grid_;
  DensityField mu_;
  DensityField nu_;
  TransformWorkspace ws_;
  SpectralPlan plan_;
  Potential phi_;
  Potential psi_;
  std::chrono::steady_clock::time_point start_;
  double sigma_ = 0.0;
  double last_pair_ = 0.0;
  double prev_dual_ = std::numeric_limits<double>::quiet_NaN();
  int iteration_ = 0;
  int stall_ = 0;
  std::vector<IterationStats> trace_;
  Probe probe_;
};

inline SolveReport solve(const CostModel& model, const DensityField& mu,
                         const DensityField& nu, const SolverConfig& config = {}) {
  Solver solver(model, mu, nu, config);
  return solver.run();
}

}  // namespace bfm
