#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mclrf/field.hpp"
#include "mclrf/filter.hpp"
#include "mclrf/geometry.hpp"
#include "mclrf/image.hpp"
#include "mclrf/renderer.hpp"

namespace mclrf {

// Noiseless full-resolution render from the ground-truth pose.
Image make_observation(const RadianceField& field, const Camera& cam, const Pose& gt_pose,
                       const QuadratureConfig& q);

// Additive Gaussian pixel noise, clamped back to [0, 1].
Image add_pixel_noise(const Image& img, double std_dev, std::uint64_t seed);

// Full-frame photometric objective: sum over all pixels of the squared RGB
// error between the observation and a render from the pose.
double photometric_error(const RadianceField& field, const Camera& cam, const Pose& pose,
                         const Image& observation, const QuadratureConfig& q);

// Positions on a regular grid around center (per-axis half ranges, sample
// counts; a count of 1 pins the axis), crossed with yaw rotations of the
// center orientation.
std::vector<Pose> make_pose_grid(const Pose& center, const Vec3& half_range,
                                 int nx, int ny, int nz, int yaw_count);

struct OracleResult {
  Pose pose;
  double error = 0.0;
  std::size_t index = 0;
  std::vector<double> all_errors;
};

// Exhaustive argmin of the photometric objective over the grid. Independent
// of the particle filter path; grid poses are evaluated concurrently.
OracleResult oracle_search(const RadianceField& field, const Camera& cam,
                           const Image& observation, const std::vector<Pose>& pose_grid,
                           const QuadratureConfig& q, int workers = 0);

struct TraceRecord {
  int step = 0;
  int phase = 0;
  int particle_count = 0;
  int rays_per_particle = 0;
  double resolution = 1.0;
  std::optional<double> position_error;
  std::optional<double> rotation_error;
  double weight_entropy = 0.0;
  double wall_time_seconds = 0.0;
};

std::string trace_to_jsonl(const std::vector<TraceRecord>& trace);

struct LocalizeOptions {
  FilterConfig filter;
  Pose init_center;
  Vec3 init_pos_range = Vec3(1.0, 1.0, 1.0);
  Vec3 init_rot_range = Vec3(15.0, 180.0, 15.0) * (3.14159265358979323846 / 180.0);
  int init_particle_count = 9600;
  int max_steps = 60;
};

struct LocalizeResult {
  Pose final_pose;
  std::vector<TraceRecord> trace;
  int steps = 0;
  double mean_step_seconds = 0.0;
  bool converged = false;
};

// Runs the filter until the last phase is reached and the position variance
// drops below a quarter of the final refinement threshold, or the step
// budget runs out. Per-step errors are recorded when gt is supplied.
LocalizeResult localize(const RadianceField& field, const Camera& cam, const Image& observation,
                        const LocalizeOptions& opts, const std::optional<Pose>& gt,
                        std::uint64_t seed);

struct TrialResult {
  std::uint64_t trial_seed = 0;
  double final_pos_err = 0.0;
  double final_rot_err = 0.0;
  bool pos_success = false;
  bool rot_success = false;
  int steps = 0;
  double mean_step_seconds = 0.0;
};

struct Aggregate {
  double mean_pos_err = 0.0;
  double mean_rot_err = 0.0;
  double pos_acc = 0.0;
  double rot_acc = 0.0;
  double mean_step_seconds = 0.0;
};

struct ExperimentSpec {
  SceneSpec scene;
  Camera camera;
  Pose gt_pose;
  LocalizeOptions options;
  int trials = 20;
  std::uint64_t seed = 0;  // trial t uses seed + t
  double pos_success_threshold = 0.05;
  double rot_success_threshold_deg = 5.0;
  double obs_noise_std = 0.0;

  void validate() const;
};

// Reference box-room experiment mirroring the benchmark defaults: +/- 1
// scene-unit initial offsets per axis, R={1/4,1/2,1}, B={8,16,32},
// N={9600,600,100}, tau=0.1.
ExperimentSpec reference_experiment();
// Noise-exterior composite with a wider initial range so a fraction of the
// initial particles falls outside the mapped room.
ExperimentSpec noise_exterior_experiment();

struct RunResult {
  std::vector<TrialResult> rows;  // sorted by trial seed
  Aggregate aggregate;
};

// Seeded independent trials against one shared scene and observation. A
// trial that throws is recorded as a failure, never aborts the batch.
RunResult run_trials(const ExperimentSpec& spec,
                     std::vector<std::vector<TraceRecord>>* traces = nullptr);

enum class AblationAxis { RejectionToggle, CoarseToFineToggle, TauSweep, InitCountSweep };

struct AblationRow {
  std::string variant;
  double value = 0.0;  // tau or particle count for sweeps, 0/1 for toggles
  Aggregate aggregate;
  std::vector<TrialResult> rows;
  double mean_trial_seconds = 0.0;
};

struct AblationTable {
  AblationAxis axis;
  std::vector<AblationRow> rows;
};

// Runs the variant matrix with shared trial seeds. The coarse-to-fine
// toggle swaps the schedule for a fixed N=600, B=32, R=1 phase.
AblationTable run_ablation(const ExperimentSpec& base, AblationAxis axis,
                           const std::vector<double>& values = {});

std::string axis_name(AblationAxis axis);

// File emission. CSV schema:
// trial_seed,final_pos_err,final_rot_err,pos_success,rot_success,steps,mean_step_seconds
std::string trials_to_csv(const std::vector<TrialResult>& rows);
std::string aggregate_to_json(const Aggregate& agg);
std::string ablation_to_csv(const AblationTable& table);
std::string ablation_to_json(const AblationTable& table);

void write_text(const std::string& path, const std::string& text);

}  // namespace mclrf
