#pragma once
// Displacement interpolation between the marginals of a transport map.
//
// rho(t) pushes mu through S_t(x) = x + t (T(x) - x). Frames reuse the
// pushforward splat with the displacements scaled by t, so rho(0) equals mu
// and rho(1) equals the full pushforward bitwise. For non-quadratic costs the
// straight-line S_t is a visualization convention, not a geodesic.

#include <cstddef>
#include <vector>

#include "bfm/errors.hpp"
#include "bfm/grid.hpp"
#include "bfm/pushforward.hpp"

namespace bfm {

inline DensityField displacement_interpolant(const TransportMap& map,
                                             const DensityField& mu, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw TOutOfRange("displacement_interpolant: t must lie in [0, 1]");
  return detail::splat_displaced(map, mu, t);
}

// count frames at the uniform times k / (count - 1), k = 0 .. count - 1.
// Frames are independent of each other; order carries no state.
inline std::vector<DensityField> frame_sequence(const TransportMap& map,
                                                const DensityField& mu, int count) {
  if (count < 2)
    throw InvalidArgument("frame_sequence: need at least two frames");
  std::vector<DensityField> frames;
  frames.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(count - 1);
    frames.push_back(displacement_interpolant(map, mu, t));
  }
  return frames;
}

}  // namespace bfm
