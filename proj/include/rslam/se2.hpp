#pragma once

#include <Eigen/Core>
#include <cmath>

namespace rslam {

using Point2 = Eigen::Vector2d;

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * M_PI);
  if (w <= -M_PI) w += 2.0 * M_PI;
  return w;
}

// Rigid transform on the plane, stored as (theta, x, y). The rotation matrix
// is materialized on demand; theta is kept in (-pi, pi] by every operation.
struct Pose2 {
  double theta = 0.0;
  double x = 0.0;
  double y = 0.0;

  Pose2() = default;
  Pose2(double theta_in, double x_in, double y_in)
      : theta(wrap_angle(theta_in)), x(x_in), y(y_in) {}

  static Pose2 identity() { return {}; }

  Eigen::Matrix2d rotation() const {
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
  }

  Point2 translation() const { return {x, y}; }
};

// a . b as rigid-motion composition.
inline Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return Pose2(a.theta + b.theta, a.x + c * b.x - s * b.y,
               a.y + s * b.x + c * b.y);
}

inline Pose2 inverse(const Pose2& p) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  // R(-theta) applied to -t.
  return Pose2(-p.theta, -(c * p.x + s * p.y), s * p.x - c * p.y);
}

// R(theta) q + t.
inline Point2 transform_point(const Pose2& p, const Point2& q) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  return {p.x + c * q.x() - s * q.y(), p.y + s * q.x() + c * q.y()};
}

// a^-1 . b, the motion taking frame a to frame b.
inline Pose2 relative_pose(const Pose2& a, const Pose2& b) {
  return compose(inverse(a), b);
}

// d/dtheta of R(theta); used by the least-squares refinements.
inline Eigen::Matrix2d rotation_derivative(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d d;
  d << -s, -c, c, -s;
  return d;
}

}  // namespace rslam
