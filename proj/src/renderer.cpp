#include "mclrf/renderer.hpp"

#include <cmath>
#include <stdexcept>

#include "mclrf/rng.hpp"

namespace mclrf {

void QuadratureConfig::validate() const {
  if (samples_per_ray < 2) throw std::invalid_argument("quadrature: need at least 2 samples per ray");
  if (!(z_near >= 0)) throw std::invalid_argument("quadrature: z_near must be non-negative");
  if (z_far > 0 && !(z_near < z_far)) throw std::invalid_argument("quadrature: z_near must be below z_far");
}

double resolve_z_far(const QuadratureConfig& q, const RadianceField& field) {
  if (q.z_far > 0) return q.z_far;
  return field.bounds().diagonal().norm();
}

RayStats render_ray(const RadianceField& field, const Ray& ray, const QuadratureConfig& q,
                    double alpha, double tau, std::vector<double>* opacity_profile) {
  q.validate();
  if (!(alpha > 0 && alpha < 0.5)) throw std::invalid_argument("render: alpha must be in (0, 0.5)");
  if (tau < 0) throw std::invalid_argument("render: tau must be non-negative");

  const int n = q.samples_per_ray;
  const double span = ray.z_far - ray.z_near;
  const double delta = span / n;

  std::mt19937_64 jitter;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (q.stratified)
    jitter = make_stream({q.jitter_seed, static_cast<std::uint64_t>(RngTag::Stratified)});

  if (opacity_profile) {
    opacity_profile->clear();
    opacity_profile->reserve(n);
  }

  RayStats stats;
  double optical_depth = 0.0;   // integral of sigma up to the current bin boundary
  double opacity_prev = 0.0;    // accumulated opacity at the previous boundary
  const double hi = 1.0 - alpha;

  for (int k = 0; k < n; ++k) {
    const double offset = q.stratified ? uni(jitter) : 0.5;
    const double z = ray.z_near + (k + offset) * delta;
    const FieldSample s = field.query(ray.at(z), ray.direction);
    const double sigma = std::max(s.density, 0.0);

    const double t_here = std::exp(-optical_depth);
    const double bin_alpha = 1.0 - std::exp(-sigma * delta);
    stats.color += t_here * bin_alpha * s.color;

    optical_depth += sigma * delta;
    const double opacity_next = 1.0 - std::exp(-optical_depth);

    // Threshold crossings, interpolated within the bin.
    const double z0 = ray.z_near + k * delta;
    if (!stats.z_trans && opacity_next >= alpha && opacity_next > opacity_prev) {
      const double f = (alpha - opacity_prev) / (opacity_next - opacity_prev);
      stats.z_trans = z0 + std::clamp(f, 0.0, 1.0) * delta;
    }
    if (!stats.z_opaque && opacity_next > hi && opacity_next > opacity_prev) {
      const double f = (hi - opacity_prev) / (opacity_next - opacity_prev);
      stats.z_opaque = z0 + std::clamp(f, 0.0, 1.0) * delta;
    }
    opacity_prev = opacity_next;
    if (opacity_profile) opacity_profile->push_back(opacity_next);
  }

  stats.accumulated_opacity = opacity_prev;

  double gap;
  if (!stats.z_trans) {
    // Never even faintly terminated: maximally uncertain ray.
    gap = span;
  } else {
    if (!stats.z_opaque) stats.z_opaque = ray.z_far;
    gap = std::min(*stats.z_opaque - *stats.z_trans, span);
  }
  stats.penalty = std::max(gap, tau);
  return stats;
}

std::vector<RayStats> render_pixels(const RadianceField& field, const Camera& cam,
                                    const Pose& pose, std::span<const Eigen::Vector2d> pixels,
                                    const QuadratureConfig& q, double alpha, double tau) {
  const double z_far = resolve_z_far(q, field);
  std::vector<RayStats> out;
  out.reserve(pixels.size());
  for (const auto& px : pixels) {
    const Ray ray = pixel_ray(cam, pose, px.x(), px.y(), q.z_near, z_far);
    out.push_back(render_ray(field, ray, q, alpha, tau));
  }
  return out;
}

Image render_image(const RadianceField& field, const Camera& cam, const Pose& pose,
                   const QuadratureConfig& q, double alpha, double tau) {
  cam.validate();
  const double z_far = resolve_z_far(q, field);
  Image img(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = pixel_ray(cam, pose, x + 0.5, y + 0.5, q.z_near, z_far);
      img.set(x, y, render_ray(field, ray, q, alpha, tau).color);
    }
  }
  return img;
}

}  // namespace mclrf
