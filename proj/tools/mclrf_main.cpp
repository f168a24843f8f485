#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mclrf/harness.hpp"
#include "mclrf/parallel.hpp"

using namespace mclrf;

namespace {

const double kDegToRad = std::acos(-1.0) / 180.0;

// Accepted forms: "identity", "x,y,z", "x,y,z,identity", "x,y,z,yaw",
// "x,y,z,yaw,pitch,roll" with angles in degrees.
Pose parse_pose(const std::string& text) {
  if (text == "identity") return Pose::identity();
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) parts.push_back(tok);
  if (parts.size() < 3) throw CLI::ValidationError("pose", "expected at least x,y,z: " + text);
  const Vec3 t(std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2]));
  if (parts.size() == 3 || (parts.size() == 4 && parts[3] == "identity"))
    return pose_from_euler(t, 0.0);
  if (parts.size() == 4) return pose_from_euler(t, std::stod(parts[3]) * kDegToRad);
  if (parts.size() == 6)
    return pose_from_euler(t, std::stod(parts[3]) * kDegToRad, std::stod(parts[4]) * kDegToRad,
                           std::stod(parts[5]) * kDegToRad);
  throw CLI::ValidationError("pose", "expected 3, 4, or 6 components: " + text);
}

SceneKind parse_kind(const std::string& kind) {
  if (kind == "box-room") return SceneKind::BoxRoom;
  if (kind == "textured-slab") return SceneKind::TexturedSlab;
  if (kind == "noise-exterior") return SceneKind::NoiseExterior;
  throw CLI::ValidationError("--kind", "unknown scene kind: " + kind);
}

Camera default_camera() { return Camera{48.0, 48.0, 32.0, 24.0, 64, 48}; }

Camera load_camera_or_default(const std::string& path) {
  if (path.empty()) return default_camera();
  return load_camera(path);
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

struct SceneFlags {
  std::string kind = "box-room";
  int dims = 64;
  double noise_exterior = -1.0;  // <0: kind default
  double wall_density = 50.0;
  double cell = 0.4;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--kind", kind, "Scene kind: box-room | textured-slab | noise-exterior")
        ->capture_default_str();
    cmd->add_option("--dims", dims, "Grid nodes per axis")->capture_default_str();
    cmd->add_option("--noise-exterior", noise_exterior,
                    "Invalid-region noise density amplitude (overrides the kind default)");
    cmd->add_option("--wall-density", wall_density, "Wall density")->capture_default_str();
    cmd->add_option("--cell", cell, "Wall texture cell size")->capture_default_str();
    cmd->add_option("--scene-seed", seed, "Scene generation seed")->capture_default_str();
  }

  SceneSpec build() const {
    SceneSpec spec = make_scene_spec(parse_kind(kind));
    spec.nx = spec.ny = spec.nz = dims;
    if (noise_exterior >= 0) {
      spec.noise_amplitude = noise_exterior;
      if (noise_exterior > 0 && spec.kind == SceneKind::BoxRoom) spec.margin = 1.8;
    }
    spec.wall_density = wall_density;
    spec.checker_cell = cell;
    spec.seed = seed;
    return spec;
  }
};

struct FilterFlags {
  std::vector<double> schedule_r{0.25, 0.5, 1.0};
  std::vector<int> schedule_b{8, 16, 32};
  std::vector<int> schedule_n{9600, 600, 100};
  std::vector<double> delta_refine;  // empty: scaled from init range
  std::string weighting = "rejection";
  double tau = kDefaultTau;
  double alpha = kDefaultAlpha;
  double exponent = 4.0;
  double noise_pos = 0.12;
  double noise_rot_deg = 0.04 / kDegToRad;
  double annealing = 0.96;
  int samples = 64;
  double z_near = 0.05;
  double z_far = 0.0;
  int n_particles = 9600;
  double pos_range = 1.0;
  double yaw_range_deg = 180.0;
  double tilt_range_deg = 15.0;
  int max_steps = 60;
  int workers = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--schedule-r", schedule_r, "Rendering scales per phase")
        ->delimiter(',')->expected(3)->capture_default_str();
    cmd->add_option("--schedule-b", schedule_b, "Rays per particle per phase")
        ->delimiter(',')->expected(3)->capture_default_str();
    cmd->add_option("--schedule-n", schedule_n, "Particle count per phase")
        ->delimiter(',')->expected(3)->capture_default_str();
    cmd->add_option("--delta-refine", delta_refine,
                    "Position-variance refinement thresholds (default scales with --pos-range)")
        ->delimiter(',')->expected(2);
    cmd->add_option("--weighting", weighting, "Weighting mode: rejection | baseline")
        ->capture_default_str();
    cmd->add_option("--tau", tau, "Minimum bound of the per-ray penalty")->capture_default_str();
    cmd->add_option("--alpha", alpha, "Opacity threshold for z_trans / z_opaque")
        ->capture_default_str();
    cmd->add_option("--exponent", exponent, "Likelihood exponent")->capture_default_str();
    cmd->add_option("--noise-pos", noise_pos, "Prediction noise std, translation")
        ->capture_default_str();
    cmd->add_option("--noise-rot", noise_rot_deg, "Prediction noise std, rotation (degrees)")
        ->capture_default_str();
    cmd->add_option("--annealing", annealing, "Per-step noise annealing factor")
        ->capture_default_str();
    cmd->add_option("--samples", samples, "Quadrature samples per ray")->capture_default_str();
    cmd->add_option("--z-near", z_near, "Ray start depth")->capture_default_str();
    cmd->add_option("--z-far", z_far, "Ray end depth (0 = bbox diagonal)")->capture_default_str();
    cmd->add_option("--n-particles", n_particles, "Initial particle count")->capture_default_str();
    cmd->add_option("--pos-range", pos_range, "Initial position offset range, per axis")
        ->capture_default_str();
    cmd->add_option("--yaw-range", yaw_range_deg, "Initial yaw range (degrees)")
        ->capture_default_str();
    cmd->add_option("--tilt-range", tilt_range_deg, "Initial pitch/roll range (degrees)")
        ->capture_default_str();
    cmd->add_option("--max-steps", max_steps, "Step budget per trial")->capture_default_str();
    cmd->add_option("--workers", workers, "Worker threads (0 = MCLRF_WORKERS or hardware)")
        ->capture_default_str();
  }

  LocalizeOptions build(const Pose& init_center) const {
    LocalizeOptions opts;
    ScheduleConfig sched = ScheduleConfig::reference(pos_range);
    for (int i = 0; i < 3; ++i)
      sched.phases[i] = Phase{schedule_r[i], schedule_b[i], schedule_n[i]};
    if (!delta_refine.empty()) sched.refine_thresholds = {delta_refine[0], delta_refine[1]};
    sched.validate();
    opts.filter.schedule = sched;

    if (weighting == "rejection") {
      opts.filter.weighting.mode = WeightingConfig::Mode::Rejection;
    } else if (weighting == "baseline") {
      opts.filter.weighting.mode = WeightingConfig::Mode::Baseline;
    } else {
      throw CLI::ValidationError("--weighting", "unknown mode: " + weighting);
    }
    opts.filter.weighting.tau = tau;
    opts.filter.weighting.alpha = alpha;
    opts.filter.weighting.exponent = exponent;
    opts.filter.weighting.validate();

    Vec6 noise;
    const double rot = noise_rot_deg * kDegToRad;
    noise << rot, rot, rot, noise_pos, noise_pos, noise_pos;
    opts.filter.motion.noise_std = noise;
    opts.filter.motion.annealing = annealing;
    opts.filter.motion.validate();

    opts.filter.quadrature.samples_per_ray = samples;
    opts.filter.quadrature.z_near = z_near;
    opts.filter.quadrature.z_far = z_far;
    opts.filter.quadrature.validate();
    opts.filter.workers = workers;

    opts.init_center = init_center;
    opts.init_particle_count = n_particles;
    opts.init_pos_range = Vec3::Constant(pos_range);
    opts.init_rot_range = Vec3(tilt_range_deg, yaw_range_deg, tilt_range_deg) * kDegToRad;
    opts.max_steps = max_steps;
    return opts;
  }
};

int cmd_scene_gen(const SceneFlags& flags, const std::string& out,
                  const std::string& camera_out) {
  const SceneSpec spec = flags.build();
  const SceneGeometry geom = geometry_of(spec);
  const VoxelField field = generate_scene(spec);
  save_field(field, out);
  if (!camera_out.empty()) save_camera(default_camera(), camera_out);

  std::cout << "map: " << out << "\n"
            << "bbox: [" << geom.bbox.min.transpose() << "] .. [" << geom.bbox.max.transpose()
            << "]\n"
            << "room interior: [" << geom.interior.min.transpose() << "] .. ["
            << geom.interior.max.transpose() << "]\n"
            << "suggested ground-truth pose: 0,0,0,identity (room center)\n";
  return 0;
}

int cmd_render(const std::string& map_path, const std::string& camera_path,
               const std::string& pose_text, const std::string& out, int samples, double z_near,
               double z_far) {
  const VoxelField field = load_field(map_path);
  const Camera cam = load_camera_or_default(camera_path);
  const Pose pose = parse_pose(pose_text);
  QuadratureConfig q;
  q.samples_per_ray = samples;
  q.z_near = z_near;
  q.z_far = z_far;
  q.validate();
  write_ppm(render_image(field, cam, pose, q), out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_localize(const std::string& map_path, const std::string& camera_path,
                 const std::string& obs_path, bool self_render, const std::string& gt_text,
                 const std::string& init_center_text, double obs_noise,
                 const FilterFlags& filter_flags, const std::string& out_dir,
                 std::uint64_t seed) {
  const VoxelField field = load_field(map_path);
  const Camera cam = load_camera_or_default(camera_path);

  std::optional<Pose> gt;
  if (!gt_text.empty()) gt = parse_pose(gt_text);

  Image observation;
  QuadratureConfig obs_quad;
  obs_quad.samples_per_ray = filter_flags.samples;
  obs_quad.z_near = filter_flags.z_near;
  obs_quad.z_far = filter_flags.z_far;
  if (self_render) {
    if (!gt) throw CLI::ValidationError("--self-render", "requires --gt");
    observation = make_observation(field, cam, *gt, obs_quad);
    if (obs_noise > 0) observation = add_pixel_noise(observation, obs_noise, seed);
  } else {
    if (obs_path.empty())
      throw CLI::ValidationError("localize", "provide --obs or --self-render with --gt");
    observation = read_ppm(obs_path);
    if (observation.width != cam.width || observation.height != cam.height)
      throw CLI::ValidationError("--obs", "observation does not match the camera dimensions");
  }

  const Pose init_center = init_center_text.empty() ? (gt ? *gt : Pose::identity())
                                                    : parse_pose(init_center_text);
  const LocalizeOptions opts = filter_flags.build(init_center);

  const LocalizeResult res = localize(field, cam, observation, opts, gt, seed);

  ensure_dir(out_dir);
  const std::string trace_path = out_dir.empty() ? "trace.jsonl" : out_dir + "/trace.jsonl";
  const std::string pose_path = out_dir.empty() ? "final_pose.json" : out_dir + "/final_pose.json";
  write_text(trace_path, trace_to_jsonl(res.trace));
  save_pose(res.final_pose, pose_path);

  std::cout << "steps: " << res.steps << (res.converged ? " (converged)" : " (budget)") << "\n"
            << "mean step seconds: " << res.mean_step_seconds << "\n";
  if (gt) {
    std::cout << "position error: " << position_error(res.final_pose, *gt) << "\n"
              << "rotation error: " << rotation_error(res.final_pose, *gt) << " deg\n";
  }
  std::cout << "trace: " << trace_path << "\nfinal pose: " << pose_path << "\n";
  return 0;
}

ExperimentSpec build_experiment(const SceneFlags& scene_flags, const FilterFlags& filter_flags,
                                const std::string& gt_text, int trials, std::uint64_t seed,
                                double obs_noise, double threshold_pos, double threshold_rot) {
  ExperimentSpec spec = reference_experiment();
  spec.scene = scene_flags.build();
  spec.camera = default_camera();
  spec.gt_pose = gt_text.empty() ? Pose::identity() : parse_pose(gt_text);
  spec.options = filter_flags.build(spec.gt_pose);
  spec.trials = trials;
  spec.seed = seed;
  spec.obs_noise_std = obs_noise;
  spec.pos_success_threshold = threshold_pos > 0 ? threshold_pos : 0.05 * filter_flags.pos_range;
  spec.rot_success_threshold_deg = threshold_rot;
  spec.validate();
  return spec;
}

int cmd_bench(const ExperimentSpec& spec, const std::string& out_dir) {
  const RunResult res = run_trials(spec);
  ensure_dir(out_dir);
  const std::string prefix = out_dir.empty() ? "" : out_dir + "/";
  write_text(prefix + "trials.csv", trials_to_csv(res.rows));
  write_text(prefix + "aggregate.json", aggregate_to_json(res.aggregate));
  std::cout << trials_to_csv(res.rows) << aggregate_to_json(res.aggregate);
  return 0;
}

int cmd_ablate(const ExperimentSpec& spec, const std::string& axis_text,
               const std::vector<double>& values, const std::string& out_dir) {
  AblationAxis axis;
  if (axis_text == "rejection") {
    axis = AblationAxis::RejectionToggle;
  } else if (axis_text == "coarse-to-fine") {
    axis = AblationAxis::CoarseToFineToggle;
  } else if (axis_text == "tau") {
    axis = AblationAxis::TauSweep;
  } else if (axis_text == "init-count") {
    axis = AblationAxis::InitCountSweep;
  } else {
    throw CLI::ValidationError("--axis", "unknown ablation axis: " + axis_text);
  }
  const AblationTable table = run_ablation(spec, axis, values);
  ensure_dir(out_dir);
  const std::string prefix = out_dir.empty() ? "" : out_dir + "/";
  write_text(prefix + "ablation_" + axis_name(axis) + ".csv", ablation_to_csv(table));
  write_text(prefix + "ablation_" + axis_name(axis) + ".json", ablation_to_json(table));
  std::cout << ablation_to_csv(table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo localization on radiance-field maps"};
  app.require_subcommand(1);

  // scene gen
  auto* scene = app.add_subcommand("scene", "Scene and map utilities");
  scene->require_subcommand(1);
  auto* gen = scene->add_subcommand("gen", "Generate a synthetic map (VRF1)");
  SceneFlags gen_scene;
  gen_scene.attach(gen);
  std::string gen_out = "map.vrf", gen_camera_out;
  gen->add_option("--out", gen_out, "Output map path")->capture_default_str();
  gen->add_option("--camera-out", gen_camera_out, "Also write the default camera JSON here");

  // render
  auto* render = app.add_subcommand("render", "Render a debug view from a map (PPM)");
  std::string render_map, render_camera, render_pose = "identity", render_out = "view.ppm";
  int render_samples = 64;
  double render_z_near = 0.05, render_z_far = 0.0;
  render->add_option("--map", render_map, "VRF1 map path")->required();
  render->add_option("--camera", render_camera, "Camera JSON (default: built-in 64x48)");
  render->add_option("--pose", render_pose, "Camera pose: x,y,z[,yaw[,pitch,roll]] (deg)")
      ->capture_default_str();
  render->add_option("--out", render_out, "Output PPM path")->capture_default_str();
  render->add_option("--samples", render_samples, "Quadrature samples per ray")
      ->capture_default_str();
  render->add_option("--z-near", render_z_near, "Ray start depth")->capture_default_str();
  render->add_option("--z-far", render_z_far, "Ray end depth (0 = bbox diagonal)")
      ->capture_default_str();

  // localize
  auto* loc = app.add_subcommand("localize", "Run the particle filter against an observation");
  std::string loc_map, loc_camera, loc_obs, loc_gt, loc_init_center, loc_out_dir = "out";
  bool loc_self_render = false;
  double loc_obs_noise = 0.02;
  std::uint64_t loc_seed = 0;
  FilterFlags loc_filter;
  loc->add_option("--map", loc_map, "VRF1 map path")->required();
  loc->add_option("--camera", loc_camera, "Camera JSON (default: built-in 64x48)");
  loc->add_option("--obs", loc_obs, "Observation image (PPM P6)");
  loc->add_flag("--self-render", loc_self_render, "Render the observation from --gt");
  loc->add_option("--gt", loc_gt, "Ground-truth pose (enables per-step error reporting)");
  loc->add_option("--init-center", loc_init_center,
                  "Center of the initial particle distribution (default: --gt or identity)");
  loc->add_option("--obs-noise", loc_obs_noise, "Pixel noise std for --self-render")
      ->capture_default_str();
  loc->add_option("--seed", loc_seed, "Run seed")->capture_default_str();
  loc->add_option("--out-dir", loc_out_dir, "Output directory")->capture_default_str();
  loc_filter.attach(loc);

  // bench
  auto* bench = app.add_subcommand("bench", "Run seeded localization trials");
  SceneFlags bench_scene;
  FilterFlags bench_filter;
  std::string bench_gt, bench_out_dir = "out";
  int bench_trials = 20;
  std::uint64_t bench_seed = 0;
  double bench_obs_noise = 0.02, bench_threshold_pos = 0.0, bench_threshold_rot = 5.0;
  bench_scene.attach(bench);
  bench_filter.attach(bench);
  bench->add_option("--gt", bench_gt, "Ground-truth pose (default: room center)");
  bench->add_option("--trials", bench_trials, "Trial count")->capture_default_str();
  bench->add_option("--seed", bench_seed, "Base seed; trial t uses seed+t")->capture_default_str();
  bench->add_option("--obs-noise", bench_obs_noise, "Observation pixel noise std")
      ->capture_default_str();
  bench->add_option("--threshold-pos", bench_threshold_pos,
                    "Position success threshold (0 = 5% of --pos-range)");
  bench->add_option("--threshold-rot", bench_threshold_rot, "Rotation success threshold (deg)")
      ->capture_default_str();
  bench->add_option("--out-dir", bench_out_dir, "Output directory")->capture_default_str();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run an ablation matrix with shared seeds");
  SceneFlags ablate_scene;
  ablate_scene.kind = "noise-exterior";
  FilterFlags ablate_filter;
  ablate_filter.pos_range = 2.5;
  std::string ablate_axis, ablate_gt, ablate_out_dir = "out";
  std::vector<double> ablate_values;
  int ablate_trials = 20;
  std::uint64_t ablate_seed = 0;
  double ablate_obs_noise = 0.02, ablate_threshold_pos = 0.0, ablate_threshold_rot = 5.0;
  ablate_scene.attach(ablate);
  ablate_filter.attach(ablate);
  ablate->add_option("--axis", ablate_axis,
                     "Ablation axis: rejection | coarse-to-fine | tau | init-count")
      ->required();
  ablate->add_option("--values", ablate_values, "Sweep values (tau or init-count axes)")
      ->delimiter(',');
  ablate->add_option("--gt", ablate_gt, "Ground-truth pose (default: room center)");
  ablate->add_option("--trials", ablate_trials, "Trials per variant")->capture_default_str();
  ablate->add_option("--seed", ablate_seed, "Base seed shared across variants")
      ->capture_default_str();
  ablate->add_option("--obs-noise", ablate_obs_noise, "Observation pixel noise std")
      ->capture_default_str();
  ablate->add_option("--threshold-pos", ablate_threshold_pos,
                     "Position success threshold (0 = 5% of --pos-range)");
  ablate->add_option("--threshold-rot", ablate_threshold_rot,
                     "Rotation success threshold (deg)")->capture_default_str();
  ablate->add_option("--out-dir", ablate_out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_scene_gen(gen_scene, gen_out, gen_camera_out);
    if (render->parsed())
      return cmd_render(render_map, render_camera, render_pose, render_out, render_samples,
                        render_z_near, render_z_far);
    if (loc->parsed())
      return cmd_localize(loc_map, loc_camera, loc_obs, loc_self_render, loc_gt, loc_init_center,
                          loc_obs_noise, loc_filter, loc_out_dir, loc_seed);
    if (bench->parsed()) {
      const ExperimentSpec spec =
          build_experiment(bench_scene, bench_filter, bench_gt, bench_trials, bench_seed,
                           bench_obs_noise, bench_threshold_pos, bench_threshold_rot);
      return cmd_bench(spec, bench_out_dir);
    }
    if (ablate->parsed()) {
      const ExperimentSpec spec =
          build_experiment(ablate_scene, ablate_filter, ablate_gt, ablate_trials, ablate_seed,
                           ablate_obs_noise, ablate_threshold_pos, ablate_threshold_rot);
      return cmd_ablate(spec, ablate_axis, ablate_values, ablate_out_dir);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
