#include "mclrf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mclrf/parallel.hpp"
#include "mclrf/rng.hpp"

namespace mclrf {

namespace {
const double kPi = std::acos(-1.0);
}

Image make_observation(const RadianceField& field, const Camera& cam, const Pose& gt_pose,
                       const QuadratureConfig& q) {
  return render_image(field, cam, gt_pose, q);
}

Image add_pixel_noise(const Image& img, double std_dev, std::uint64_t seed) {
  if (std_dev <= 0) return img;
  Image out = img;
  auto rng = make_stream({seed, static_cast<std::uint64_t>(RngTag::ObsNoise)});
  std::normal_distribution<double> gauss(0.0, std_dev);
  for (double& v : out.data) v = std::clamp(v + gauss(rng), 0.0, 1.0);
  return out;
}

double photometric_error(const RadianceField& field, const Camera& cam, const Pose& pose,
                         const Image& observation, const QuadratureConfig& q) {
  if (observation.width != cam.width || observation.height != cam.height)
    throw std::invalid_argument("photometric_error: observation does not match the camera");
  const Image rendered = render_image(field, cam, pose, q);
  double sum = 0.0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) sum += (observation.at(x, y) - rendered.at(x, y)).squaredNorm();
  return sum;
}

std::vector<Pose> make_pose_grid(const Pose& center, const Vec3& half_range,
                                 int nx, int ny, int nz, int yaw_count) {
  if (nx < 1 || ny < 1 || nz < 1 || yaw_count < 1)
    throw std::invalid_argument("pose grid: sample counts must be >= 1");
  auto axis_values = [](double c, double r, int n) {
    std::vector<double> v;
    if (n == 1) {
      v.push_back(c);
    } else {
      for (int i = 0; i < n; ++i) v.push_back(c - r + 2.0 * r * i / (n - 1));
    }
    return v;
  };
  const auto xs = axis_values(center.translation.x(), half_range.x(), nx);
  const auto ys = axis_values(center.translation.y(), half_range.y(), ny);
  const auto zs = axis_values(center.translation.z(), half_range.z(), nz);

  std::vector<Pose> grid;
  grid.reserve(xs.size() * ys.size() * zs.size() * yaw_count);
  for (double z : zs)
    for (double y : ys)
      for (double x : xs)
        for (int k = 0; k < yaw_count; ++k) {
          const double yaw = -kPi + 2.0 * kPi * k / yaw_count;
          Twist spin;
          spin.delta[1] = yaw;
          Pose p;
          p.rotation = compose(center, exp_map(spin)).rotation;
          p.translation = Vec3(x, y, z);
          grid.push_back(p);
        }
  return grid;
}

OracleResult oracle_search(const RadianceField& field, const Camera& cam,
                           const Image& observation, const std::vector<Pose>& pose_grid,
                           const QuadratureConfig& q, int workers) {
  if (pose_grid.empty()) throw std::invalid_argument("oracle_search: empty pose grid");
  OracleResult result;
  result.all_errors.resize(pose_grid.size());
  parallel_for(pose_grid.size(), workers, [&](std::size_t i) {
    result.all_errors[i] = photometric_error(field, cam, pose_grid[i], observation, q);
  });
  result.index = static_cast<std::size_t>(
      std::min_element(result.all_errors.begin(), result.all_errors.end()) -
      result.all_errors.begin());
  result.pose = pose_grid[result.index];
  result.error = result.all_errors[result.index];
  return result;
}

std::string trace_to_jsonl(const std::vector<TraceRecord>& trace) {
  std::ostringstream out;
  for (const TraceRecord& r : trace) {
    nlohmann::json j;
    j["step"] = r.step;
    j["phase"] = r.phase;
    j["N"] = r.particle_count;
    j["B"] = r.rays_per_particle;
    j["R"] = r.resolution;
    j["position_error"] = r.position_error ? nlohmann::json(*r.position_error) : nlohmann::json();
    j["rotation_error"] = r.rotation_error ? nlohmann::json(*r.rotation_error) : nlohmann::json();
    j["weight_entropy"] = r.weight_entropy;
    j["wall_time_seconds"] = r.wall_time_seconds;
    out << j.dump() << "\n";
  }
  return out.str();
}

LocalizeResult localize(const RadianceField& field, const Camera& cam, const Image& observation,
                        const LocalizeOptions& opts, const std::optional<Pose>& gt,
                        std::uint64_t seed) {
  opts.filter.schedule.validate();
  if (opts.max_steps < 1) throw std::invalid_argument("localize: step budget must be >= 1");

  FilterState state;
  state.particles = init_particles(opts.init_particle_count, opts.init_center,
                                   opts.init_pos_range, opts.init_rot_range, seed);

  LocalizeResult result;
  const double converged_var = opts.filter.schedule.refine_thresholds[1] / 4.0;
  double total_seconds = 0.0;
  for (int s = 0; s < opts.max_steps; ++s) {
    const StepStats stats = step(state, field, cam, observation, opts.filter, seed);
    total_seconds += stats.wall_seconds;

    TraceRecord rec;
    rec.step = stats.step;
    rec.phase = stats.phase;
    rec.particle_count = stats.particle_count;
    rec.rays_per_particle = stats.rays_per_particle;
    rec.resolution = stats.resolution;
    rec.weight_entropy = stats.weight_entropy;
    rec.wall_time_seconds = stats.wall_seconds;
    if (gt) {
      const Pose est = estimate(state.particles);
      rec.position_error = position_error(est, *gt);
      rec.rotation_error = rotation_error(est, *gt);
    }
    result.trace.push_back(rec);
    ++result.steps;

    // Converged once an update has actually run in the final phase and the
    // belief is tight; a freshly advanced phase index alone does not count.
    if (stats.phase == 2 && position_variance(state.particles) < converged_var) {
      result.converged = true;
      break;
    }
  }
  result.final_pose = estimate(state.particles);
  result.mean_step_seconds = result.steps > 0 ? total_seconds / result.steps : 0.0;
  return result;
}

void ExperimentSpec::validate() const {
  if (trials < 1) throw std::invalid_argument("experiment: need at least one trial");
  if (!(pos_success_threshold > 0) || !(rot_success_threshold_deg > 0))
    throw std::invalid_argument("experiment: success thresholds must be positive");
  scene.validate();
  camera.validate();
  options.filter.schedule.validate();
}

ExperimentSpec reference_experiment() {
  ExperimentSpec spec;
  spec.scene = make_scene_spec(SceneKind::BoxRoom);
  spec.camera = Camera{48.0, 48.0, 32.0, 24.0, 64, 48};
  spec.gt_pose = Pose::identity();

  spec.options.init_center = spec.gt_pose;
  spec.options.init_pos_range = Vec3(1.0, 1.0, 1.0);
  spec.options.init_rot_range = Vec3(15.0, 180.0, 15.0) * (kPi / 180.0);
  spec.options.init_particle_count = 9600;
  spec.options.max_steps = 60;

  spec.options.filter.schedule = ScheduleConfig::reference(1.0);
  spec.options.filter.weighting.mode = WeightingConfig::Mode::Rejection;
  spec.options.filter.weighting.tau = 0.1;
  Vec6 noise;
  noise << 0.04, 0.04, 0.04, 0.12, 0.12, 0.12;
  spec.options.filter.motion.noise_std = noise;
  spec.options.filter.motion.annealing = 0.96;

  spec.trials = 20;
  spec.pos_success_threshold = 0.05;  // 5% of the +/-1 initial offset range
  spec.rot_success_threshold_deg = 5.0;
  // Self-rendered observations are otherwise noise-free, which would give
  // the likelihood heuristic an unbounded dynamic range; a small pixel
  // noise emulates the sensor floor of real captures.
  spec.obs_noise_std = 0.02;
  return spec;
}

ExperimentSpec noise_exterior_experiment() {
  ExperimentSpec spec = reference_experiment();
  spec.scene = make_scene_spec(SceneKind::NoiseExterior);
  const double range = 2.5;
  spec.options.init_pos_range = Vec3::Constant(range);
  spec.options.filter.schedule = ScheduleConfig::reference(range);
  spec.pos_success_threshold = 0.05 * range;
  // The rejection penalty needs the transparent/opaque gap resolved well
  // below tau, or the quantized gap swamps the floor and biases valid rays;
  // the wide noise-scene bbox makes the default span too coarse for that.
  spec.options.filter.quadrature.samples_per_ray = 128;
  spec.options.filter.quadrature.z_far = 8.0;
  return spec;
}

RunResult run_trials(const ExperimentSpec& spec,
                     std::vector<std::vector<TraceRecord>>* traces) {
  spec.validate();
  const VoxelField field = generate_scene(spec.scene);
  const Image clean = make_observation(field, spec.camera, spec.gt_pose,
                                       spec.options.filter.quadrature);

  RunResult out;
  for (int t = 0; t < spec.trials; ++t) {
    const std::uint64_t trial_seed = spec.seed + static_cast<std::uint64_t>(t);
    TrialResult row;
    row.trial_seed = trial_seed;
    std::vector<TraceRecord> trace;
    try {
      const Image obs = spec.obs_noise_std > 0
                            ? add_pixel_noise(clean, spec.obs_noise_std, trial_seed)
                            : clean;
      const LocalizeResult res =
          localize(field, spec.camera, obs, spec.options, spec.gt_pose, trial_seed);
      row.final_pos_err = position_error(res.final_pose, spec.gt_pose);
      row.final_rot_err = rotation_error(res.final_pose, spec.gt_pose);
      row.steps = res.steps;
      row.mean_step_seconds = res.mean_step_seconds;
      trace = res.trace;
    } catch (const std::exception&) {
      row.final_pos_err = std::numeric_limits<double>::infinity();
      row.final_rot_err = std::numeric_limits<double>::infinity();
      row.steps = spec.options.max_steps;
    }
    row.pos_success = row.final_pos_err < spec.pos_success_threshold;
    row.rot_success = row.final_rot_err < spec.rot_success_threshold_deg;
    out.rows.push_back(row);
    if (traces) traces->push_back(std::move(trace));
  }

  std::sort(out.rows.begin(), out.rows.end(),
            [](const TrialResult& a, const TrialResult& b) { return a.trial_seed < b.trial_seed; });

  Aggregate& agg = out.aggregate;
  for (const TrialResult& r : out.rows) {
    agg.mean_pos_err += r.final_pos_err;
    agg.mean_rot_err += r.final_rot_err;
    agg.pos_acc += r.pos_success ? 1.0 : 0.0;
    agg.rot_acc += r.rot_success ? 1.0 : 0.0;
    agg.mean_step_seconds += r.mean_step_seconds;
  }
  const double n = static_cast<double>(out.rows.size());
  agg.mean_pos_err /= n;
  agg.mean_rot_err /= n;
  agg.pos_acc /= n;
  agg.rot_acc /= n;
  agg.mean_step_seconds /= n;
  return out;
}

std::string axis_name(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::RejectionToggle: return "rejection";
    case AblationAxis::CoarseToFineToggle: return "coarse-to-fine";
    case AblationAxis::TauSweep: return "tau";
    case AblationAxis::InitCountSweep: return "init-count";
  }
  return "unknown";
}

AblationTable run_ablation(const ExperimentSpec& base, AblationAxis axis,
                           const std::vector<double>& values) {
  AblationTable table;
  table.axis = axis;

  auto run_variant = [&](const std::string& label, double value, const ExperimentSpec& spec) {
    const RunResult res = run_trials(spec);
    AblationRow row;
    row.variant = label;
    row.value = value;
    row.aggregate = res.aggregate;
    row.rows = res.rows;
    double total = 0.0;
    for (const TrialResult& r : res.rows) total += r.mean_step_seconds * r.steps;
    row.mean_trial_seconds = total / static_cast<double>(res.rows.size());
    table.rows.push_back(std::move(row));
  };

  switch (axis) {
    case AblationAxis::RejectionToggle: {
      ExperimentSpec off = base;
      off.options.filter.weighting.mode = WeightingConfig::Mode::Baseline;
      run_variant("rejection-off", 0.0, off);
      ExperimentSpec on = base;
      on.options.filter.weighting.mode = WeightingConfig::Mode::Rejection;
      run_variant("rejection-on", 1.0, on);
      break;
    }
    case AblationAxis::CoarseToFineToggle: {
      ExperimentSpec single = base;
      const double range = base.options.init_pos_range.maxCoeff();
      single.options.filter.schedule =
          ScheduleConfig::single_phase(Phase{1.0, 32, 600}, range > 0 ? range : 1.0);
      run_variant("single-phase", 0.0, single);
      run_variant("coarse-to-fine", 1.0, base);
      break;
    }
    case AblationAxis::TauSweep: {
      std::vector<double> taus = values.empty() ? std::vector<double>{0.05, 0.1, 0.2, 0.4} : values;
      for (double tau : taus) {
        ExperimentSpec spec = base;
        spec.options.filter.weighting.mode = WeightingConfig::Mode::Rejection;
        spec.options.filter.weighting.tau = tau;
        std::ostringstream label;
        label << "tau=" << tau;
        run_variant(label.str(), tau, spec);
      }
      break;
    }
    case AblationAxis::InitCountSweep: {
      std::vector<double> counts =
          values.empty() ? std::vector<double>{1200, 2400, 4800, 9600} : values;
      for (double c : counts) {
        ExperimentSpec spec = base;
        spec.options.init_particle_count = static_cast<int>(c);
        std::ostringstream label;
        label << "n0=" << static_cast<int>(c);
        run_variant(label.str(), c, spec);
      }
      break;
    }
  }
  return table;
}

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

std::string trials_to_csv(const std::vector<TrialResult>& rows) {
  std::ostringstream out;
  out << "trial_seed,final_pos_err,final_rot_err,pos_success,rot_success,steps,mean_step_seconds\n";
  for (const TrialResult& r : rows) {
    out << r.trial_seed << "," << fmt(r.final_pos_err) << "," << fmt(r.final_rot_err) << ","
        << (r.pos_success ? 1 : 0) << "," << (r.rot_success ? 1 : 0) << "," << r.steps << ","
        << fmt(r.mean_step_seconds) << "\n";
  }
  return out.str();
}

std::string aggregate_to_json(const Aggregate& agg) {
  nlohmann::json j{{"mean_pos_err", agg.mean_pos_err},
                   {"mean_rot_err", agg.mean_rot_err},
                   {"pos_acc", agg.pos_acc},
                   {"rot_acc", agg.rot_acc},
                   {"mean_step_seconds", agg.mean_step_seconds}};
  return j.dump(2) + "\n";
}

std::string ablation_to_csv(const AblationTable& table) {
  std::ostringstream out;
  out << "axis,variant,value,mean_pos_err,mean_rot_err,pos_acc,rot_acc,mean_step_seconds,"
         "mean_trial_seconds\n";
  for (const AblationRow& r : table.rows) {
    out << axis_name(table.axis) << "," << r.variant << "," << fmt(r.value) << ","
        << fmt(r.aggregate.mean_pos_err) << "," << fmt(r.aggregate.mean_rot_err) << ","
        << fmt(r.aggregate.pos_acc) << "," << fmt(r.aggregate.rot_acc) << ","
        << fmt(r.aggregate.mean_step_seconds) << "," << fmt(r.mean_trial_seconds) << "\n";
  }
  return out.str();
}

std::string ablation_to_json(const AblationTable& table) {
  nlohmann::json j;
  j["axis"] = axis_name(table.axis);
  j["variants"] = nlohmann::json::array();
  for (const AblationRow& r : table.rows) {
    nlohmann::json v;
    v["variant"] = r.variant;
    v["value"] = r.value;
    v["mean_pos_err"] = r.aggregate.mean_pos_err;
    v["mean_rot_err"] = r.aggregate.mean_rot_err;
    v["pos_acc"] = r.aggregate.pos_acc;
    v["rot_acc"] = r.aggregate.rot_acc;
    v["mean_step_seconds"] = r.aggregate.mean_step_seconds;
    v["mean_trial_seconds"] = r.mean_trial_seconds;
    j["variants"].push_back(v);
  }
  return j.dump(2) + "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace mclrf
