#include "mclrf/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mclrf {

namespace {
constexpr double kSmallAngle = 1e-8;
const double kPi = std::acos(-1.0);
}  // namespace

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: image size must be positive");
  if (!(cx >= 0 && cx < width)) throw std::invalid_argument("camera: cx out of range");
  if (!(cy >= 0 && cy < height)) throw std::invalid_argument("camera: cy out of range");
}

Camera Camera::scaled(double r) const {
  if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("camera: scale must be in (0, 1]");
  int d = static_cast<int>(std::lround(1.0 / r));
  if (d < 1 || std::abs(1.0 / r - d) > 1e-9)
    throw std::invalid_argument("camera: scale must be the reciprocal of an integer");
  if (width % d != 0 || height % d != 0)
    throw std::invalid_argument("camera: scale divisor must divide both image dimensions");
  Camera out = *this;
  out.fx = fx / d;
  out.fy = fy / d;
  out.cx = cx / d;
  out.cy = cy / d;
  out.width = width / d;
  out.height = height / d;
  return out;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

Pose exp_map(const Twist& t) {
  if (!t.delta.allFinite()) throw std::invalid_argument("exp_map: non-finite twist");
  const Vec3 w = t.delta.head<3>();
  const Vec3 v = t.delta.tail<3>();
  const double theta = w.norm();
  const Mat3 wx = skew(w);

  Pose out;
  if (theta < kSmallAngle) {
    out.rotation = Mat3::Identity() + wx + 0.5 * wx * wx;
    out.translation = (Mat3::Identity() + 0.5 * wx) * v;
  } else {
    const double s = std::sin(theta), c = std::cos(theta);
    out.rotation = Mat3::Identity() + (s / theta) * wx + ((1.0 - c) / (theta * theta)) * wx * wx;
    const Mat3 V = Mat3::Identity() + ((1.0 - c) / (theta * theta)) * wx +
                   ((theta - s) / (theta * theta * theta)) * wx * wx;
    out.translation = V * v;
  }
  return out;
}

Twist log_map(const Pose& p) {
  const Mat3& r = p.rotation;
  const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);

  Vec3 w;
  if (theta < kSmallAngle) {
    w = 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  } else if (theta > kPi - 1e-6) {
    // Near pi the antisymmetric part vanishes; recover the axis from the
    // dominant diagonal of (R + I)/2.
    Mat3 a = 0.5 * (r + Mat3::Identity());
    int k = 0;
    a.diagonal().maxCoeff(&k);
    Vec3 axis;
    axis[k] = std::sqrt(std::max(a(k, k), 0.0));
    for (int i = 0; i < 3; ++i)
      if (i != k) axis[i] = a(k, i) / axis[k];
    axis.normalize();
    // Fix the sign using the antisymmetric residue.
    Vec3 anti(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (anti.dot(axis) < 0) axis = -axis;
    w = theta * axis;
  } else {
    const double s = std::sin(theta);
    w = (theta / (2.0 * s)) * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  }

  const Mat3 wx = skew(w);
  Mat3 v_inv;
  if (theta < kSmallAngle) {
    v_inv = Mat3::Identity() - 0.5 * wx;
  } else {
    const double coeff = 1.0 / (theta * theta) -
                         (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    v_inv = Mat3::Identity() - 0.5 * wx + coeff * wx * wx;
  }

  Twist out;
  out.delta.head<3>() = w;
  out.delta.tail<3>() = v_inv * p.translation;
  return out;
}

Ray pixel_ray(const Camera& cam, const Pose& pose, double px, double py,
              double z_near, double z_far) {
  if (!cam.contains(px, py)) throw std::invalid_argument("pixel_ray: pixel out of bounds");
  Vec3 dir_cam((px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0);
  Ray ray;
  ray.origin = pose.translation;
  ray.direction = (pose.rotation * dir_cam).normalized();
  ray.z_near = z_near;
  ray.z_far = z_far;
  return ray;
}

double position_error(const Pose& a, const Pose& b) {
  return (a.translation - b.translation).norm();
}

double rotation_error(const Pose& a, const Pose& b) {
  const Mat3 rel = a.rotation.transpose() * b.rotation;
  const double c = std::clamp((rel.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c) * 180.0 / kPi;
}

bool is_valid_rotation(const Mat3& r, double tol) {
  if ((r * r.transpose() - Mat3::Identity()).norm() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

Pose pose_from_euler(const Vec3& translation, double yaw, double pitch, double roll) {
  Pose out;
  out.translation = translation;
  out.rotation = (Eigen::AngleAxisd(yaw, Vec3::UnitY()) *
                  Eigen::AngleAxisd(pitch, Vec3::UnitX()) *
                  Eigen::AngleAxisd(roll, Vec3::UnitZ()))
                     .toRotationMatrix();
  return out;
}

std::string pose_to_json(const Pose& p) {
  nlohmann::json j;
  auto& m = j["transform"] = nlohmann::json::array();
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() = p.rotation;
  t.topRightCorner<3, 1>() = p.translation;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m.push_back(t(r, c));
  return j.dump(2) + "\n";
}

Pose pose_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const auto& m = j.at("transform");
  if (!m.is_array() || m.size() != 16)
    throw std::invalid_argument("pose: transform must be 16 numbers");
  Eigen::Matrix4d t;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) t(r, c) = m[r * 4 + c].get<double>();
  Pose out;
  out.rotation = t.topLeftCorner<3, 3>();
  out.translation = t.topRightCorner<3, 1>();
  if (!is_valid_rotation(out.rotation, 1e-6))
    throw std::invalid_argument("pose: rotation block is not orthonormal");
  return out;
}

std::string camera_to_json(const Camera& c) {
  nlohmann::json j{{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx},
                   {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
  return j.dump(2) + "\n";
}

Camera camera_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Camera c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.validate();
  return c;
}

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void save_pose(const Pose& p, const std::string& path) { write_text_file(path, pose_to_json(p)); }
Pose load_pose(const std::string& path) { return pose_from_json(read_text_file(path)); }
void save_camera(const Camera& c, const std::string& path) { write_text_file(path, camera_to_json(c)); }
Camera load_camera(const std::string& path) { return camera_from_json(read_text_file(path)); }

}  // namespace mclrf
