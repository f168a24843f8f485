#include "mclrf/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mclrf/rng.hpp"

static_assert(std::endian::native == std::endian::little, "VRF1 I/O assumes a little-endian host");

namespace mclrf {

FieldSample exterior_noise(std::uint64_t seed, double amplitude, double cell, const Vec3& p) {
  auto q = [cell](double x) {
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(x / cell)));
  };
  std::uint64_t h = hash_combine(seed, static_cast<std::uint64_t>(RngTag::SceneNoise));
  h = hash_combine(h, q(p.x()));
  h = hash_combine(h, q(p.y()));
  h = hash_combine(h, q(p.z()));
  FieldSample s;
  s.density = amplitude * u01_from_bits(splitmix64(h ^ 1));
  s.color = Vec3(u01_from_bits(splitmix64(h ^ 2)), u01_from_bits(splitmix64(h ^ 3)),
                 u01_from_bits(splitmix64(h ^ 4)));
  return s;
}

VoxelField::VoxelField(int nx, int ny, int nz, const Aabb& bbox)
    : nx_(nx), ny_(ny), nz_(nz), bbox_(bbox) {
  if (nx < 2 || ny < 2 || nz < 2)
    throw std::invalid_argument("voxel field: dims must be at least 2 per axis");
  if (!((bbox.min.array() < bbox.max.array()).all()))
    throw std::invalid_argument("voxel field: bbox min must be below max componentwise");
  spacing_ = bbox.diagonal().cwiseQuotient(Vec3(nx - 1, ny - 1, nz - 1));
  const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
  density_.assign(n, 0.0f);
  color_.assign(3 * n, 0.0f);
}

Vec3 VoxelField::node_position(int i, int j, int k) const {
  return bbox_.min + Vec3(i * spacing_.x(), j * spacing_.y(), k * spacing_.z());
}

void VoxelField::set_color_at(int i, int j, int k, const Vec3& c) {
  const std::size_t base = 3 * index(i, j, k);
  color_[base] = static_cast<float>(c.x());
  color_[base + 1] = static_cast<float>(c.y());
  color_[base + 2] = static_cast<float>(c.z());
}

Vec3 VoxelField::color_at(int i, int j, int k) const {
  const std::size_t base = 3 * index(i, j, k);
  return Vec3(color_[base], color_[base + 1], color_[base + 2]);
}

FieldSample VoxelField::query(const Vec3& point, const Vec3& /*dir*/) const {
  if (!point.allFinite()) throw std::invalid_argument("field query: non-finite point");

  if (!bbox_.contains(point)) {
    if (exterior_.mode == ExteriorMode::Noise)
      return exterior_noise(exterior_.seed, exterior_.noise_amplitude, exterior_.noise_cell, point);
    return FieldSample{};
  }

  const Vec3 u = (point - bbox_.min).cwiseQuotient(spacing_);
  const int i0 = std::clamp(static_cast<int>(std::floor(u.x())), 0, nx_ - 2);
  const int j0 = std::clamp(static_cast<int>(std::floor(u.y())), 0, ny_ - 2);
  const int k0 = std::clamp(static_cast<int>(std::floor(u.z())), 0, nz_ - 2);
  const double fx = u.x() - i0, fy = u.y() - j0, fz = u.z() - k0;

  double density = 0.0;
  Vec3 color = Vec3::Zero();
  for (int dk = 0; dk < 2; ++dk) {
    const double wz = dk ? fz : 1.0 - fz;
    for (int dj = 0; dj < 2; ++dj) {
      const double wyz = wz * (dj ? fy : 1.0 - fy);
      for (int di = 0; di < 2; ++di) {
        const double w = wyz * (di ? fx : 1.0 - fx);
        const std::size_t idx = index(i0 + di, j0 + dj, k0 + dk);
        density += w * density_[idx];
        const std::size_t base = 3 * idx;
        color.x() += w * color_[base];
        color.y() += w * color_[base + 1];
        color.z() += w * color_[base + 2];
      }
    }
  }
  return FieldSample{color, density};
}

bool VoxelField::same_data(const VoxelField& other) const {
  return nx_ == other.nx_ && ny_ == other.ny_ && nz_ == other.nz_ &&
         bbox_.min == other.bbox_.min && bbox_.max == other.bbox_.max &&
         density_ == other.density_ && color_ == other.color_;
}

void SceneSpec::validate() const {
  if (nx < 2 || ny < 2 || nz < 2) throw std::invalid_argument("scene: dims must be at least 2");
  if (!((room_half.array() > 0).all()))
    throw std::invalid_argument("scene: room half extents must be positive");
  if (!(wall_thickness > 0)) throw std::invalid_argument("scene: wall thickness must be positive");
  if (wall_thickness >= room_half.minCoeff())
    throw std::invalid_argument("scene: walls thicker than the room are degenerate");
  if (margin < 0) throw std::invalid_argument("scene: margin must be non-negative");
  if (!(wall_density > 0)) throw std::invalid_argument("scene: wall density must be positive");
  if (!(checker_cell > 0)) throw std::invalid_argument("scene: checker cell must be positive");
  if (noise_amplitude < 0) throw std::invalid_argument("scene: noise amplitude must be non-negative");
  if (!(noise_cell > 0)) throw std::invalid_argument("scene: noise cell must be positive");
}

SceneSpec make_scene_spec(SceneKind kind) {
  SceneSpec spec;
  spec.kind = kind;
  if (kind == SceneKind::NoiseExterior) {
    spec.noise_amplitude = 0.3;
  } else {
    // No invalid region to model: a slim margin keeps the bbox (and with it
    // the default ray span) tight around the room.
    spec.margin = 0.5;
  }
  return spec;
}

namespace {

Aabb scene_bbox(const SceneSpec& spec) {
  Aabb box;
  if (spec.kind == SceneKind::TexturedSlab) {
    box.min = Vec3(-spec.room_half.x(), -spec.room_half.y(), 0.0);
    box.max = Vec3(spec.room_half.x(), spec.room_half.y(), 2.0 * spec.room_half.z());
  } else {
    const Vec3 half = spec.room_half + Vec3::Constant(spec.margin);
    box.min = -half;
    box.max = half;
  }
  return box;
}

struct RoomModel {
  Vec3 interior_half;
  Vec3 outer_half;
  double wall_density;
  double checker_cell;

  FieldSample at(const Vec3& p) const {
    const Vec3 a = p.cwiseAbs();
    // Nearest face by penetration depth; interior points take the color of
    // the face they are closest to, so wall colors stay clean under
    // trilinear blending at the wall boundary.
    int axis = 0;
    double excess = a[0] - interior_half[0];
    for (int i = 1; i < 3; ++i) {
      const double e = a[i] - interior_half[i];
      if (e > excess) {
        excess = e;
        axis = i;
      }
    }
    const int u_axis = (axis + 1) % 3, v_axis = (axis + 2) % 3;
    const double shade = box_room_cell_shade(p[u_axis], p[v_axis], checker_cell);
    FieldSample s;
    s.color = shade * box_room_face_color(axis, p[axis]);
    s.density = excess > 0 ? wall_density : 0.0;
    return s;
  }

  bool in_room(const Vec3& p) const {
    return (p.cwiseAbs().array() <= outer_half.array()).all();
  }
};

}  // namespace

double box_room_cell_shade(double u, double v, double cell) {
  // Offset by half a cell so pattern boundaries avoid the coordinate axes.
  const auto a = static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(u / cell + 0.5)));
  const auto b = static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(v / cell + 0.5)));
  const std::uint64_t h = hash_combine(hash_combine(0x9d4c1f2b6aULL, a), b);
  return 0.4 + 0.6 * u01_from_bits(h);
}

// Distinct per-face base colors make yaw observable in a Lambertian room.
Vec3 box_room_face_color(int axis, double sign) {
  static const Vec3 kFaces[6] = {
      {0.85, 0.25, 0.25},  // +x
      {0.25, 0.85, 0.30},  // -x
      {0.45, 0.45, 0.50},  // +y
      {0.90, 0.90, 0.85},  // -y
      {0.25, 0.35, 0.85},  // +z
      {0.80, 0.70, 0.25},  // -z
  };
  return kFaces[2 * axis + (sign < 0 ? 1 : 0)];
}

SceneGeometry geometry_of(const SceneSpec& spec) {
  spec.validate();
  SceneGeometry g;
  g.bbox = scene_bbox(spec);
  if (spec.kind == SceneKind::TexturedSlab) {
    g.outer = g.bbox;
    g.interior = Aabb{g.bbox.min, Vec3(g.bbox.max.x(), g.bbox.max.y(), spec.room_half.z())};
    g.wall_thickness = spec.room_half.z();
    return g;
  }
  const Vec3 extent = g.bbox.diagonal();
  const Vec3 spacing = extent.cwiseQuotient(Vec3(spec.nx - 1, spec.ny - 1, spec.nz - 1));
  // Walls thinner than the grid can resolve would vanish between nodes.
  g.wall_thickness = std::max(spec.wall_thickness, 1.5 * spacing.maxCoeff());
  if (g.wall_thickness >= spec.room_half.minCoeff())
    throw std::invalid_argument("scene: grid too coarse for the requested room");
  g.outer = Aabb{-spec.room_half, spec.room_half};
  g.interior = Aabb{-(spec.room_half - Vec3::Constant(g.wall_thickness)),
                    spec.room_half - Vec3::Constant(g.wall_thickness)};
  return g;
}

VoxelField generate_scene(const SceneSpec& spec) {
  const SceneGeometry geom = geometry_of(spec);
  VoxelField field(spec.nx, spec.ny, spec.nz, geom.bbox);

  if (spec.kind == SceneKind::TexturedSlab) {
    const double z0 = spec.room_half.z();
    const Vec3 base(0.80, 0.72, 0.55);
    for (int k = 0; k < spec.nz; ++k)
      for (int j = 0; j < spec.ny; ++j)
        for (int i = 0; i < spec.nx; ++i) {
          const Vec3 p = field.node_position(i, j, k);
          field.set_color_at(i, j, k,
                             box_room_cell_shade(p.x(), p.y(), spec.checker_cell) * base);
          if (p.z() >= z0)
            field.density_at(i, j, k) = static_cast<float>(spec.wall_density);
        }
    return field;
  }

  const RoomModel room{geom.interior.max, geom.outer.max, spec.wall_density, spec.checker_cell};
  for (int k = 0; k < spec.nz; ++k)
    for (int j = 0; j < spec.ny; ++j)
      for (int i = 0; i < spec.nx; ++i) {
        const Vec3 p = field.node_position(i, j, k);
        FieldSample s;
        if (room.in_room(p)) {
          s = room.at(p);
        } else if (spec.noise_amplitude > 0) {
          s = exterior_noise(spec.seed, spec.noise_amplitude, spec.noise_cell, p);
        }
        field.density_at(i, j, k) = static_cast<float>(s.density);
        field.set_color_at(i, j, k, s.color);
      }

  if (spec.noise_amplitude > 0) {
    ExteriorConfig ext;
    ext.mode = ExteriorMode::Noise;
    ext.noise_amplitude = spec.noise_amplitude;
    ext.noise_cell = spec.noise_cell;
    ext.seed = spec.seed;
    field.set_exterior(ext);
  }
  return field;
}

namespace {
constexpr char kMagic[4] = {'V', 'R', 'F', '1'};
}

void save_field(const VoxelField& field, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");

  out.write(kMagic, 4);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(field.nx()),
                                 static_cast<std::uint32_t>(field.ny()),
                                 static_cast<std::uint32_t>(field.nz())};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const Aabb box = field.bounds();
  const double corners[6] = {box.min.x(), box.min.y(), box.min.z(),
                             box.max.x(), box.max.y(), box.max.z()};
  out.write(reinterpret_cast<const char*>(corners), sizeof(corners));
  out.write(reinterpret_cast<const char*>(field.density().data()),
            static_cast<std::streamsize>(field.density().size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(field.color().data()),
            static_cast<std::streamsize>(field.color().size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

VoxelField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::Io, "cannot open " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw LoadError(LoadError::Kind::BadMagic, path + ": bad magic, not a VRF1 map");

  std::uint32_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in) throw LoadError(LoadError::Kind::Truncated, path + ": truncated header");
  if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2 ||
      dims[0] > (1u << 21) || dims[1] > (1u << 21) || dims[2] > (1u << 21))
    throw LoadError(LoadError::Kind::DimensionMismatch, path + ": implausible grid dimensions");
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (n > (std::size_t(1) << 31))
    throw LoadError(LoadError::Kind::DimensionMismatch, path + ": grid too large");

  double corners[6];
  in.read(reinterpret_cast<char*>(corners), sizeof(corners));
  if (!in) throw LoadError(LoadError::Kind::Truncated, path + ": truncated header");
  Aabb box{Vec3(corners[0], corners[1], corners[2]), Vec3(corners[3], corners[4], corners[5])};
  if (!((box.min.array() < box.max.array()).all()))
    throw LoadError(LoadError::Kind::DimensionMismatch, path + ": degenerate bbox");

  VoxelField field(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                   static_cast<int>(dims[2]), box);
  in.read(reinterpret_cast<char*>(field.density().data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float))
    throw LoadError(LoadError::Kind::Truncated, path + ": truncated density payload");
  in.read(reinterpret_cast<char*>(field.color().data()),
          static_cast<std::streamsize>(3 * n * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != 3 * n * sizeof(float))
    throw LoadError(LoadError::Kind::Truncated, path + ": truncated color payload");
  return field;
}

FunctionField homogeneous_field(double density, const Vec3& color, const Aabb& bounds) {
  return FunctionField(
      [density, color](const Vec3&, const Vec3&) {
        return FieldSample{color, density};
      },
      bounds);
}

FunctionField slab_field(double z0, double density, const Vec3& color, const Aabb& bounds) {
  return FunctionField(
      [z0, density, color](const Vec3& p, const Vec3&) {
        FieldSample s;
        s.color = color;
        s.density = p.z() >= z0 ? density : 0.0;
        return s;
      },
      bounds);
}

}  // namespace mclrf
