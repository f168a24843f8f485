#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mclrf/field.hpp"
#include "mclrf/geometry.hpp"
#include "mclrf/image.hpp"
#include "mclrf/renderer.hpp"

namespace mclrf {

struct Particle {
  Pose pose;
  double weight = 0.0;
};

struct ParticleSet {
  std::vector<Particle> particles;
  int step = 0;

  std::size_t size() const { return particles.size(); }
};

struct MotionConfig {
  Pose odometry;  // O_t; identity for static global localization
  Vec6 noise_std = Vec6::Zero();  // per-axis std-devs: rotation radians, then translation
  double annealing = 0.97;        // multiplies the noise std-devs each step

  void validate() const;
};

struct WeightingConfig {
  enum class Mode { Baseline, Rejection };

  Mode mode = Mode::Rejection;
  double exponent = 4.0;
  double tau = kDefaultTau;
  double alpha = kDefaultAlpha;

  void validate() const;
};

// One coarse-to-fine phase: rendering scale R, rays per particle B,
// particle count N.
struct Phase {
  double resolution = 1.0;
  int rays_per_particle = 32;
  int particle_count = 100;
};

struct ScheduleConfig {
  std::array<Phase, 3> phases;
  // Position-variance triggers for advancing phase 0->1 and 1->2.
  std::array<double, 2> refine_thresholds{};

  void validate() const;

  // R={1/4,1/2,1}, B={8,16,32}, N={9600,600,100}; refinement thresholds
  // scaled from the initial per-axis position range.
  static ScheduleConfig reference(double init_range = 1.0);
  // Fixed-compute schedule (three identical phases) used by the
  // coarse-to-fine ablation.
  static ScheduleConfig single_phase(const Phase& phase, double init_range = 1.0);
};

struct FilterConfig {
  MotionConfig motion;
  WeightingConfig weighting;
  ScheduleConfig schedule = ScheduleConfig::reference();
  QuadratureConfig quadrature;
  int workers = 0;  // 0: resolve from MCLRF_WORKERS / hardware
};

struct FilterState {
  ParticleSet particles;
  int phase = 0;  // 0..2, non-decreasing
};

// Uniformly weighted particles over center +/- pos_range per axis, rotations
// perturbed by uniform per-axis twists within +/- rot_range (radians).
ParticleSet init_particles(int n, const Pose& center, const Vec3& pos_range,
                           const Vec3& rot_range, std::uint64_t seed);

// x_t = x_{t-1} * O_t * Exp(delta), delta ~ N(0, annealed std-devs); weights
// unchanged. Per-particle RNG streams derive from (seed, step, index).
ParticleSet predict(const ParticleSet& set, const MotionConfig& motion, std::uint64_t seed);

// Raw likelihood heuristic (B / sum)^exponent with the degenerate
// perfect-match denominator clamped to 1e-12.
double importance_weight(double error_sum, int rays, double exponent);

struct WeighReport {
  std::vector<double> log_raw_weights;      // exponent * (log B - log sum), per particle
  std::vector<Eigen::Vector2i> pixels;      // shared pixel sample, scaled-image coords
  double entropy = 0.0;                     // of the normalized weights, nats
};

// Importance weighting at the phase's scale. Samples B pixels uniformly
// without replacement (one shared set per step), renders every particle at
// the scaled intrinsics, and sets normalized weights from the photometric
// error (baseline) or error * penalty (rejection). The observation must
// already be downscaled to the phase resolution.
ParticleSet weigh(const ParticleSet& set, const RadianceField& field, const Camera& cam,
                  const Image& observation, const Phase& phase, const WeightingConfig& w,
                  const QuadratureConfig& q, std::uint64_t seed, int workers = 0,
                  WeighReport* report = nullptr);

// Systematic (low-variance) resampling to n_out uniformly weighted
// particles; every input's multiplicity is within one of n_out * weight.
ParticleSet resample(const ParticleSet& set, int n_out, std::uint64_t seed);

// Point estimate: weighted mean position, weighted chordal-mean rotation
// (principal eigenvector of the quaternion outer-product sum).
Pose estimate(const ParticleSet& set);

// Trace of the positional covariance (the refinement trigger metric).
double position_variance(const ParticleSet& set);

// Shannon entropy of the weights, nats; uniform weights give log(n).
double weight_entropy(const ParticleSet& set);

void normalize_weights(ParticleSet& set);

// Advances the phase when the position variance falls below the current
// threshold; at most one advance per call, terminal at the last phase.
bool maybe_refine(FilterState& state, const ScheduleConfig& schedule);

struct StepStats {
  int step = 0;       // step index that was executed
  int phase = 0;      // phase the update ran in
  double resolution = 1.0;
  int rays_per_particle = 0;
  int particle_count = 0;  // post-resampling
  double weight_entropy = 0.0;
  double wall_seconds = 0.0;
  bool refined = false;
};

// One MCL-NeRF update: predict, downscale, weigh, resample to the phase's N,
// then the refinement check. The observation is full resolution.
StepStats step(FilterState& state, const RadianceField& field, const Camera& cam,
               const Image& observation, const FilterConfig& config, std::uint64_t seed);

}  // namespace mclrf
