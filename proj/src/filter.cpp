#include "mclrf/filter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mclrf/parallel.hpp"
#include "mclrf/rng.hpp"

namespace mclrf {

void MotionConfig::validate() const {
  if ((noise_std.array() < 0).any())
    throw std::invalid_argument("motion: noise std-devs must be non-negative");
  if (!(annealing > 0 && annealing <= 1))
    throw std::invalid_argument("motion: annealing factor must be in (0, 1]");
  if (!is_valid_rotation(odometry.rotation, 1e-6))
    throw std::invalid_argument("motion: odometry rotation is not orthonormal");
}

void WeightingConfig::validate() const {
  if (!(exponent > 0)) throw std::invalid_argument("weighting: exponent must be positive");
  if (tau < 0) throw std::invalid_argument("weighting: tau must be non-negative");
  if (!(alpha > 0 && alpha < 0.5)) throw std::invalid_argument("weighting: alpha must be in (0, 0.5)");
}

void ScheduleConfig::validate() const {
  for (const Phase& p : phases) {
    if (!(p.resolution > 0 && p.resolution <= 1))
      throw std::invalid_argument("schedule: resolution must be in (0, 1]");
    if (p.rays_per_particle < 1) throw std::invalid_argument("schedule: rays per particle must be >= 1");
    if (p.particle_count < 1) throw std::invalid_argument("schedule: particle count must be >= 1");
  }
  for (int i = 1; i < 3; ++i) {
    if (phases[i].resolution < phases[i - 1].resolution)
      throw std::invalid_argument("schedule: resolution must be non-decreasing");
    if (phases[i].rays_per_particle < phases[i - 1].rays_per_particle)
      throw std::invalid_argument("schedule: rays per particle must be non-decreasing");
    if (phases[i].particle_count > phases[i - 1].particle_count)
      throw std::invalid_argument("schedule: particle count must be non-increasing");
  }
  for (double t : refine_thresholds)
    if (!(t > 0)) throw std::invalid_argument("schedule: refinement thresholds must be positive");
}

ScheduleConfig ScheduleConfig::reference(double init_range) {
  ScheduleConfig c;
  c.phases = {Phase{0.25, 8, 9600}, Phase{0.5, 16, 600}, Phase{1.0, 32, 100}};
  const double s = init_range > 0 ? init_range : 1.0;
  c.refine_thresholds = {(0.15 * s) * (0.15 * s), (0.05 * s) * (0.05 * s)};
  return c;
}

ScheduleConfig ScheduleConfig::single_phase(const Phase& phase, double init_range) {
  ScheduleConfig c = reference(init_range);
  c.phases = {phase, phase, phase};
  return c;
}

ParticleSet init_particles(int n, const Pose& center, const Vec3& pos_range,
                           const Vec3& rot_range, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("init_particles: need at least one particle");
  if ((pos_range.array() < 0).any() || (rot_range.array() < 0).any())
    throw std::invalid_argument("init_particles: ranges must be non-negative");

  auto rng = make_stream({seed, static_cast<std::uint64_t>(RngTag::Init)});
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  ParticleSet set;
  set.particles.resize(n);
  for (int i = 0; i < n; ++i) {
    Vec3 dp, dr;
    for (int a = 0; a < 3; ++a) dp[a] = pos_range[a] > 0 ? uni(rng) * pos_range[a] : 0.0;
    for (int a = 0; a < 3; ++a) dr[a] = rot_range[a] > 0 ? uni(rng) * rot_range[a] : 0.0;

    Twist spin;
    spin.delta.head<3>() = dr;
    Particle& p = set.particles[i];
    p.pose.rotation = (compose(center, exp_map(spin))).rotation;
    p.pose.translation = center.translation + dp;
    p.weight = 1.0 / n;
  }
  return set;
}

ParticleSet predict(const ParticleSet& set, const MotionConfig& motion, std::uint64_t seed) {
  motion.validate();
  if (set.particles.empty()) throw std::invalid_argument("predict: empty particle set");

  const Vec6 sigma = motion.noise_std * std::pow(motion.annealing, set.step);
  ParticleSet out = set;
  for (std::size_t i = 0; i < out.particles.size(); ++i) {
    auto rng = make_stream({seed, static_cast<std::uint64_t>(set.step), i,
                            static_cast<std::uint64_t>(RngTag::Predict)});
    std::normal_distribution<double> gauss(0.0, 1.0);
    Twist noise;
    for (int a = 0; a < 6; ++a) noise.delta[a] = sigma[a] > 0 ? gauss(rng) * sigma[a] : 0.0;
    out.particles[i].pose = compose(compose(set.particles[i].pose, motion.odometry), exp_map(noise));
  }
  return out;
}

double importance_weight(double error_sum, int rays, double exponent) {
  const double denom = std::max(error_sum, 1e-12);
  return std::pow(rays / denom, exponent);
}

ParticleSet weigh(const ParticleSet& set, const RadianceField& field, const Camera& cam,
                  const Image& observation, const Phase& phase, const WeightingConfig& w,
                  const QuadratureConfig& q, std::uint64_t seed, int workers,
                  WeighReport* report) {
  w.validate();
  if (set.particles.empty()) throw std::invalid_argument("weigh: empty particle set");
  const Camera scaled = cam.scaled(phase.resolution);
  if (observation.width != scaled.width || observation.height != scaled.height)
    throw std::invalid_argument("weigh: observation does not match the camera at this scale");

  // One pixel sample shared by all particles this step.
  const int total_pixels = scaled.width * scaled.height;
  const int rays = std::min(phase.rays_per_particle, total_pixels);
  std::vector<int> indices(total_pixels);
  std::iota(indices.begin(), indices.end(), 0);
  auto rng = make_stream({seed, static_cast<std::uint64_t>(set.step),
                          static_cast<std::uint64_t>(RngTag::Pixels)});
  for (int k = 0; k < rays; ++k) {
    std::uniform_int_distribution<int> pick(k, total_pixels - 1);
    std::swap(indices[k], indices[pick(rng)]);
  }

  std::vector<Eigen::Vector2i> pixels(rays);
  std::vector<Eigen::Vector2d> centers(rays);
  std::vector<Vec3> observed(rays);
  for (int k = 0; k < rays; ++k) {
    const int ix = indices[k] % scaled.width;
    const int iy = indices[k] / scaled.width;
    pixels[k] = {ix, iy};
    centers[k] = {ix + 0.5, iy + 0.5};
    observed[k] = observation.at(ix, iy);
  }

  const std::size_t n = set.particles.size();
  std::vector<double> log_raw(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto stats =
        render_pixels(field, scaled, set.particles[i].pose, centers, q, w.alpha, w.tau);
    double sum = 0.0;
    for (int k = 0; k < rays; ++k) {
      const double err = (observed[k] - stats[k].color).squaredNorm();
      sum += w.mode == WeightingConfig::Mode::Rejection ? err * stats[k].penalty : err;
    }
    log_raw[i] = w.exponent * (std::log(static_cast<double>(rays)) -
                               std::log(std::max(sum, 1e-12)));
  });

  // Shift by the max log weight so normalization never overflows.
  const double shift = *std::max_element(log_raw.begin(), log_raw.end());
  ParticleSet out = set;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.particles[i].weight = std::exp(log_raw[i] - shift);
    total += out.particles[i].weight;
  }
  for (auto& p : out.particles) p.weight /= total;

  if (report) {
    report->log_raw_weights = std::move(log_raw);
    report->pixels = std::move(pixels);
    report->entropy = weight_entropy(out);
  }
  return out;
}

ParticleSet resample(const ParticleSet& set, int n_out, std::uint64_t seed) {
  if (set.particles.empty()) throw std::invalid_argument("resample: empty particle set");
  if (n_out < 1) throw std::invalid_argument("resample: need at least one output particle");

  double total = 0.0;
  for (const auto& p : set.particles) {
    if (!(p.weight >= 0) || !std::isfinite(p.weight))
      throw std::invalid_argument("resample: weights must be finite and non-negative");
    total += p.weight;
  }
  if (total <= 0) throw std::runtime_error("resample: degenerate belief, all weights zero");

  auto rng = make_stream({seed, static_cast<std::uint64_t>(set.step),
                          static_cast<std::uint64_t>(RngTag::Resample)});
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double start = uni(rng);

  ParticleSet out;
  out.step = set.step;
  out.particles.reserve(n_out);
  std::size_t i = 0;
  double cum = set.particles[0].weight;
  for (int k = 0; k < n_out; ++k) {
    const double pointer = (start + k) * total / n_out;
    while (pointer >= cum && i + 1 < set.particles.size()) cum += set.particles[++i].weight;
    out.particles.push_back(Particle{set.particles[i].pose, 1.0 / n_out});
  }
  return out;
}

Pose estimate(const ParticleSet& set) {
  if (set.particles.empty()) throw std::invalid_argument("estimate: empty particle set");
  double total = 0.0;
  for (const auto& p : set.particles) total += p.weight;
  if (!(total > 0)) throw std::invalid_argument("estimate: weights must have positive mass");

  Vec3 mean = Vec3::Zero();
  Eigen::Matrix4d outer = Eigen::Matrix4d::Zero();
  for (const auto& p : set.particles) {
    const double w = p.weight / total;
    mean += w * p.pose.translation;
    const Eigen::Quaterniond q(p.pose.rotation);
    const Eigen::Vector4d v = q.coeffs();  // (x, y, z, w); sign cancels in v v^T
    outer += w * (v * v.transpose());
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(outer);
  const Eigen::Vector4d v = eig.eigenvectors().col(3);  // largest eigenvalue
  Eigen::Quaterniond q(v(3), v(0), v(1), v(2));
  q.normalize();

  Pose out;
  out.translation = mean;
  out.rotation = q.toRotationMatrix();
  return out;
}

double position_variance(const ParticleSet& set) {
  if (set.particles.empty()) throw std::invalid_argument("position_variance: empty particle set");
  double total = 0.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : set.particles) {
    total += p.weight;
    mean += p.weight * p.pose.translation;
  }
  if (!(total > 0)) throw std::invalid_argument("position_variance: weights must have positive mass");
  mean /= total;
  double var = 0.0;
  for (const auto& p : set.particles)
    var += (p.weight / total) * (p.pose.translation - mean).squaredNorm();
  return var;
}

double weight_entropy(const ParticleSet& set) {
  double total = 0.0;
  for (const auto& p : set.particles) total += p.weight;
  if (!(total > 0)) return 0.0;
  double h = 0.0;
  for (const auto& p : set.particles) {
    const double w = p.weight / total;
    if (w > 0) h -= w * std::log(w);
  }
  return h;
}

void normalize_weights(ParticleSet& set) {
  double total = 0.0;
  for (const auto& p : set.particles) total += p.weight;
  if (!(total > 0)) throw std::runtime_error("normalize: degenerate belief, all weights zero");
  for (auto& p : set.particles) p.weight /= total;
}

bool maybe_refine(FilterState& state, const ScheduleConfig& schedule) {
  if (state.phase >= 2) return false;
  if (position_variance(state.particles) < schedule.refine_thresholds[state.phase]) {
    ++state.phase;
    return true;
  }
  return false;
}

StepStats step(FilterState& state, const RadianceField& field, const Camera& cam,
               const Image& observation, const FilterConfig& config, std::uint64_t seed) {
  config.schedule.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Phase& phase = config.schedule.phases[state.phase];

  StepStats stats;
  stats.step = state.particles.step;
  stats.phase = state.phase;
  stats.resolution = phase.resolution;
  stats.rays_per_particle = phase.rays_per_particle;

  state.particles = predict(state.particles, config.motion, seed);
  const Image scaled_obs = downscale(observation, phase.resolution);
  WeighReport report;
  state.particles = weigh(state.particles, field, cam, scaled_obs, phase, config.weighting,
                          config.quadrature, seed, config.workers, &report);
  state.particles = resample(state.particles, phase.particle_count, seed);
  state.particles.step += 1;

  stats.refined = maybe_refine(state, config.schedule);
  stats.weight_entropy = report.entropy;
  stats.particle_count = static_cast<int>(state.particles.size());
  stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

}  // namespace mclrf
