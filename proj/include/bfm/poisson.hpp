#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "bfm/errors.hpp"
#include "bfm/grid.hpp"

namespace bfm {

namespace detail {

// fftw_malloc'ed scratch so new-array execution sees the same alignment the
// plans were created with.
class FftwBuffer {
 public:
  explicit FftwBuffer(std::size_t count)
      : ptr_(static_cast<double*>(fftw_malloc(count * sizeof(double)))) {
    if (ptr_ == nullptr) throw Error("fftw_malloc failed");
  }
  ~FftwBuffer() { fftw_free(ptr_); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  double* get() { return ptr_; }

 private:
  double* ptr_;
};

}  // namespace detail

// Neumann Laplacian inverse and homogeneous Sobolev norms on the cell-centered
// grid, diagonalized by the even cosine transform. Construction plans the
// transforms and is not thread safe; solves afterwards may run concurrently
// because every call owns its scratch buffer.
class SpectralPlan {
 public:
  explicit SpectralPlan(const Grid& grid) : grid_(grid) {
    const int d = grid.dim();
    int n[3] = {1, 1, 1};
    fftw_r2r_kind fwd_kind[3];
    fftw_r2r_kind bwd_kind[3];
    coefficient_scale_ = 1.0;
    for (int a = 0; a < d; ++a) {
      n[a] = grid.extent(a);
      fwd_kind[a] = FFTW_REDFT10;
      bwd_kind[a] = FFTW_REDFT01;
      coefficient_scale_ *= 2.0 * grid.extent(a);
      const double na = grid.extent(a);
      auto& lam = lambda_[a];
      auto& wt = weight_[a];
      lam.resize(grid.extent(a));
      wt.resize(grid.extent(a));
      for (int k = 0; k < grid.extent(a); ++k) {
        lam[k] = (2.0 - 2.0 * std::cos(kPi * k / na)) * na * na;
        wt[k] = (k == 0 ? 1.0 : 2.0) / (4.0 * na * na);
      }
    }
    for (int a = d; a < 3; ++a) {
      lambda_[a] = {0.0};
      weight_[a] = {1.0};
    }
    detail::FftwBuffer scratch(grid.size());
    fwd_ = fftw_plan_r2r(d, n, scratch.get(), scratch.get(), fwd_kind,
                         FFTW_ESTIMATE);
    bwd_ = fftw_plan_r2r(d, n, scratch.get(), scratch.get(), bwd_kind,
                         FFTW_ESTIMATE);
    if (fwd_ == nullptr || bwd_ == nullptr) throw Error("fftw planning failed");
  }

  ~SpectralPlan() {
    if (fwd_ != nullptr) fftw_destroy_plan(fwd_);
    if (bwd_ != nullptr) fftw_destroy_plan(bwd_);
  }

  SpectralPlan(const SpectralPlan&) = delete;
  SpectralPlan& operator=(const SpectralPlan&) = delete;

  const Grid& grid() const { return grid_; }

  // u = (-Laplacian)^{-1} (rhs - mean(rhs)) with zero-flux boundaries; the
  // zero mode is discarded so the output always has zero mean.
  void solve_neumann(const double* rhs, double* out) const {
    detail::FftwBuffer buf(grid_.size());
    double* b = buf.get();
    std::memcpy(b, rhs, grid_.size() * sizeof(double));
    fftw_execute_r2r(fwd_, b, b);
    const double scale = coefficient_scale_;
    std::size_t idx = 0;
    for (std::size_t k0 = 0; k0 < lambda_[0].size(); ++k0) {
      const double l0 = lambda_[0][k0];
      for (std::size_t k1 = 0; k1 < lambda_[1].size(); ++k1) {
        const double l01 = l0 + lambda_[1][k1];
        for (std::size_t k2 = 0; k2 < lambda_[2].size(); ++k2, ++idx) {
          const double lam = l01 + lambda_[2][k2];
          b[idx] = lam == 0.0 ? 0.0 : b[idx] / (lam * scale);
        }
      }
    }
    fftw_execute_r2r(bwd_, b, b);
    std::memcpy(out, b, grid_.size() * sizeof(double));
  }

  Potential solve_neumann(const ScalarField& rhs) const {
    require_mine(rhs);
    Potential u(grid_);
    solve_neumann(rhs.values.data(), u.values.data());
    return u;
  }

  // Squared H^1-dot seminorm: sum over nonzero modes of lambda(k) |f_hat(k)|^2
  // with coefficients normalized against the midpoint inner product.
  double h1dot_norm_sq(const ScalarField& f) const {
    require_mine(f);
    return spectral_sum(f.values.data(), /*inverse_weight=*/false);
  }
  double h1dot_norm_sq(const double* f) const {
    return spectral_sum(f, /*inverse_weight=*/false);
  }

  // Squared H^{-1}-dot seminorm of the mean-free part, i.e. the pairing
  // <f - mean, (-Laplacian)^{-1} f>.
  double hm1dot_norm_sq(const ScalarField& f) const {
    require_mine(f);
    return spectral_sum(f.values.data(), /*inverse_weight=*/true);
  }
  double hm1dot_norm_sq(const double* f) const {
    return spectral_sum(f, /*inverse_weight=*/true);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  void require_mine(const ScalarField& f) const {
    if (f.grid != grid_) throw GridMismatch("field grid does not match plan");
  }

  double spectral_sum(const double* f, bool inverse_weight) const {
    detail::FftwBuffer buf(grid_.size());
    double* b = buf.get();
    std::memcpy(b, f, grid_.size() * sizeof(double));
    fftw_execute_r2r(fwd_, b, b);
    double acc = 0.0;
    std::size_t idx = 0;
    for (std::size_t k0 = 0; k0 < lambda_[0].size(); ++k0) {
      const double l0 = lambda_[0][k0];
      const double w0 = weight_[0][k0];
      for (std::size_t k1 = 0; k1 < lambda_[1].size(); ++k1) {
        const double l01 = l0 + lambda_[1][k1];
        const double w01 = w0 * weight_[1][k1];
        for (std::size_t k2 = 0; k2 < lambda_[2].size(); ++k2, ++idx) {
          const double lam = l01 + lambda_[2][k2];
          if (lam == 0.0) continue;
          const double energy = b[idx] * b[idx] * (w01 * weight_[2][k2]);
          acc += inverse_weight ? energy / lam : energy * lam;
        }
      }
    }
    return acc;
  }

  Grid grid_;
  std::array<std::vector<double>, 3> lambda_;
  std::array<std::vector<double>, 3> weight_;
  double coefficient_scale_ = 1.0;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

}  // namespace bfm
