#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mclrf/field.hpp"
#include "mclrf/geometry.hpp"
#include "mclrf/image.hpp"

namespace mclrf {

// Opacity threshold "close to zero" for the transparent/opaque depths, and
// the minimum bound of the per-ray penalty.
inline constexpr double kDefaultAlpha = 0.01;
inline constexpr double kDefaultTau = 0.1;

struct QuadratureConfig {
  int samples_per_ray = 64;
  bool stratified = false;  // jittered sample depths; off keeps renders deterministic
  double z_near = 0.05;
  double z_far = 0.0;  // <= 0 means "bbox diagonal of the field"
  std::uint64_t jitter_seed = 0;

  void validate() const;
};

double resolve_z_far(const QuadratureConfig& q, const RadianceField& field);

// Per-ray render result. z_trans is the depth where the accumulated opacity
// first reaches alpha, z_opaque the last depth where it stays below
// 1 - alpha; both found by linear interpolation of the accumulated opacity
// between adjacent sample boundaries. Unset when the threshold is never
// reached. The penalty is max(z_opaque - z_trans, tau), with the whole ray
// span substituted for the gap when the ray never reaches alpha.
struct RayStats {
  Vec3 color = Vec3::Zero();
  double accumulated_opacity = 0.0;
  std::optional<double> z_trans;
  std::optional<double> z_opaque;
  double penalty = 0.0;  // F(r), >= tau
};

// Quadrature over uniform bins in [z_near, z_far], midpoint samples;
// residual transmittance composites over black. opacity_profile, when
// given, receives the accumulated opacity at each bin boundary.
RayStats render_ray(const RadianceField& field, const Ray& ray, const QuadratureConfig& q,
                    double alpha = kDefaultAlpha, double tau = kDefaultTau,
                    std::vector<double>* opacity_profile = nullptr);

// Renders the rays through the given pixel centers; order preserved.
std::vector<RayStats> render_pixels(const RadianceField& field, const Camera& cam,
                                    const Pose& pose, std::span<const Eigen::Vector2d> pixels,
                                    const QuadratureConfig& q, double alpha = kDefaultAlpha,
                                    double tau = kDefaultTau);

// Full-frame color render.
Image render_image(const RadianceField& field, const Camera& cam, const Pose& pose,
                   const QuadratureConfig& q, double alpha = kDefaultAlpha,
                   double tau = kDefaultTau);

}  // namespace mclrf
