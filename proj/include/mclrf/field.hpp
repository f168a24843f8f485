#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mclrf/geometry.hpp"

namespace mclrf {

struct FieldSample {
  Vec3 color = Vec3::Zero();  // each channel in [0, 1]
  double density = 0.0;       // >= 0, inverse scene units
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  Vec3 diagonal() const { return max - min; }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

// The map M: color and density queried at a point along a view direction.
class RadianceField {
 public:
  virtual ~RadianceField() = default;
  virtual FieldSample query(const Vec3& point, const Vec3& dir) const = 0;
  virtual Aabb bounds() const = 0;
};

// Behavior for queries outside the grid bbox. Noise mimics an untrained
// map region: seeded, piecewise-constant pseudo-random density and color.
enum class ExteriorMode { Zero, Noise };

struct ExteriorConfig {
  ExteriorMode mode = ExteriorMode::Zero;
  double noise_amplitude = 0.3;
  double noise_cell = 0.33;
  std::uint64_t seed = 0;
};

// Value at the quantized noise lattice cell containing p. Deterministic in
// (seed, cell index); used both to bake margin voxels and to answer
// out-of-bbox queries.
FieldSample exterior_noise(std::uint64_t seed, double amplitude, double cell, const Vec3& p);

// Dense grid stand-in for a trained NeRF. Nodes are vertex-centered: node
// (i,j,k) sits at bbox.min + (i,j,k) * spacing with spacing = extent/(n-1),
// stored x-fastest then y then z. Queries interpolate trilinearly; grids
// are Lambertian, so the view direction is accepted and ignored.
class VoxelField final : public RadianceField {
 public:
  VoxelField(int nx, int ny, int nz, const Aabb& bbox);

  FieldSample query(const Vec3& point, const Vec3& dir) const override;
  Aabb bounds() const override { return bbox_; }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny_ + j) * nx_ + i;
  }
  Vec3 node_position(int i, int j, int k) const;

  float& density_at(int i, int j, int k) { return density_[index(i, j, k)]; }
  float density_at(int i, int j, int k) const { return density_[index(i, j, k)]; }
  void set_color_at(int i, int j, int k, const Vec3& c);
  Vec3 color_at(int i, int j, int k) const;

  const std::vector<float>& density() const { return density_; }
  const std::vector<float>& color() const { return color_; }
  std::vector<float>& density() { return density_; }
  std::vector<float>& color() { return color_; }

  const ExteriorConfig& exterior() const { return exterior_; }
  void set_exterior(const ExteriorConfig& e) { exterior_ = e; }

  bool same_data(const VoxelField& other) const;

 private:
  int nx_, ny_, nz_;
  Aabb bbox_;
  Vec3 spacing_;
  std::vector<float> density_;  // nx*ny*nz
  std::vector<float> color_;    // nx*ny*nz * 3, rgb interleaved
  ExteriorConfig exterior_;     // runtime configuration, not serialized
};

enum class SceneKind { BoxRoom, TexturedSlab, NoiseExterior };

// Synthetic scene recipe. BoxRoom: hollow room with opaque checker-textured
// walls, vacuum interior. NoiseExterior: BoxRoom plus low-amplitude noise
// filling the space between the room and the grid bbox (and beyond it, via
// the exterior config). TexturedSlab: vacuum half-space in front of an
// opaque checker slab.
struct SceneSpec {
  SceneKind kind = SceneKind::BoxRoom;
  int nx = 64, ny = 64, nz = 64;
  Vec3 room_half = Vec3(2.25, 1.75, 2.25);  // outer half extents of the room
  double wall_thickness = 0.25;             // inflated to resolve on coarse grids
  double margin = 1.8;                      // bbox padding around the room
  double wall_density = 50.0;
  double checker_cell = 0.4;
  double noise_amplitude = 0.0;  // > 0 fills the margin with noise
  double noise_cell = 0.33;
  std::uint64_t seed = 0;

  void validate() const;
};

SceneSpec make_scene_spec(SceneKind kind);

// Analytic boxes of a generated scene, for classifying poses as inside or
// outside the valid (mapped) region.
struct SceneGeometry {
  Aabb interior;  // vacuum region of the room
  Aabb outer;     // room including walls
  Aabb bbox;      // grid bounds
  double wall_thickness = 0.0;
};

SceneGeometry geometry_of(const SceneSpec& spec);

// Analytic color model of the box-room walls, shared with render oracles:
// per-face base color times a hashed per-cell shade over the in-plane axes
// (aperiodic, so wall views are unique under translation).
Vec3 box_room_face_color(int axis, double sign);
double box_room_cell_shade(double u, double v, double cell);

// Deterministic for a fixed spec+seed, bit-identical across runs.
VoxelField generate_scene(const SceneSpec& spec);

class LoadError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, Truncated, DimensionMismatch, Io };

  LoadError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// "VRF1" map file, little-endian, no padding: magic, nx/ny/nz u32, bbox min
// then max as six f64, density f32 * n, color f32 * 3n. Round trip is
// bit-exact. See docs/FORMATS.md.
void save_field(const VoxelField& field, const std::string& path);
VoxelField load_field(const std::string& path);

// Procedural fields used for closed-form renderer checks.
class FunctionField final : public RadianceField {
 public:
  using Fn = std::function<FieldSample(const Vec3&, const Vec3&)>;
  FunctionField(Fn fn, const Aabb& bounds) : fn_(std::move(fn)), bounds_(bounds) {}

  FieldSample query(const Vec3& p, const Vec3& d) const override { return fn_(p, d); }
  Aabb bounds() const override { return bounds_; }

 private:
  Fn fn_;
  Aabb bounds_;
};

FunctionField homogeneous_field(double density, const Vec3& color, const Aabb& bounds);
// Vacuum for p.z < z0, constant density at and beyond z0.
FunctionField slab_field(double z0, double density, const Vec3& color, const Aabb& bounds);

}  // namespace mclrf
