#pragma once

#include <Eigen/Dense>

#include <string>

namespace mclrf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Rigid transform mapping camera-frame points to world-frame points
// (world-from-camera). The camera looks along +z with x right and y down.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return Pose{}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

// se(3) increment. Ordering: delta[0..2] rotation (radians), delta[3..5]
// translation (scene units).
struct Twist {
  Vec6 delta = Vec6::Zero();
};

// Pinhole intrinsics, pixel units. Principal point in continuous pixel
// coordinates where (0,0) is the top-left image corner.
struct Camera {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;

  // Intrinsics for rendering at scale r = 1/d where d divides both
  // dimensions (the R_t * K of the coarse-to-fine schedule).
  Camera scaled(double r) const;

  bool contains(double px, double py) const {
    return px >= 0.0 && px <= width && py >= 0.0 && py <= height;
  }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double z_near = 0.0;
  double z_far = 1.0;

  Vec3 at(double z) const { return origin + z * direction; }
};

// a then-applied-after b: world_from_a * a_from_b.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

Mat3 skew(const Vec3& w);

// SE(3) exponential; series expansion below rotation angle 1e-8.
Pose exp_map(const Twist& t);
// Inverse of exp_map for rotation angles < pi.
Twist log_map(const Pose& p);

// World-frame ray through the pixel center (px, py). Pixel (i, j) of an
// image has center (i + 0.5, j + 0.5).
Ray pixel_ray(const Camera& cam, const Pose& pose, double px, double py,
              double z_near = 0.05, double z_far = 100.0);

double position_error(const Pose& a, const Pose& b);
// Geodesic angle between the rotations, degrees in [0, 180].
double rotation_error(const Pose& a, const Pose& b);

bool is_valid_rotation(const Mat3& r, double tol = 1e-9);

// Yaw about the camera y axis, then pitch about x, then roll about z,
// all in radians. Matches the CLI's "x,y,z,yaw[,pitch,roll]" pose syntax.
Pose pose_from_euler(const Vec3& translation, double yaw, double pitch = 0.0,
                     double roll = 0.0);

// JSON forms: pose is {"transform": [16 row-major doubles]}, camera is
// {fx, fy, cx, cy, width, height}. See docs/FORMATS.md.
std::string pose_to_json(const Pose& p);
Pose pose_from_json(const std::string& text);
std::string camera_to_json(const Camera& c);
Camera camera_from_json(const std::string& text);

void save_pose(const Pose& p, const std::string& path);
Pose load_pose(const std::string& path);
void save_camera(const Camera& c, const std::string& path);
Camera load_camera(const std::string& path);

}  // namespace mclrf
