#include "sylva/analysis/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace sylva::analysis {

Circle fit_circle_kasa(const std::vector<Vec2>& points) {
  if (points.size() < 3) throw FitFailed("circle fit needs at least 3 points");
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  // x^2 + y^2 + D x + E y + F = 0 in centered coordinates.
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (const Vec2& q : points) {
    const Vec2 p = q - mean;
    const Eigen::Vector3d row(p.x(), p.y(), 1.0);
    ata += row * row.transpose();
    atb -= row * p.squaredNorm();
  }
  Eigen::LDLT<Eigen::Matrix3d> ldlt(ata);
  if (ldlt.info() != Eigen::Success || std::abs(ldlt.vectorD().minCoeff()) < 1e-12 * ata.trace()) {
    throw FitFailed("circle fit: degenerate point set");
  }
  const Eigen::Vector3d sol = ldlt.solve(atb);
  Circle c;
  c.center = mean + Vec2(-sol(0) / 2.0, -sol(1) / 2.0);
  const double r2 = (sol(0) * sol(0) + sol(1) * sol(1)) / 4.0 - sol(2);
  if (!(r2 > 0.0) || !std::isfinite(r2)) throw FitFailed("circle fit: imaginary radius");
  c.radius = std::sqrt(r2);
  c.rms = circle_rms(points, c.center, c.radius);
  return c;
}

double circle_rms(const std::vector<Vec2>& points, const Vec2& center, double radius) {
  if (points.empty()) return 0.0;
  double sum = 0.0;
  for (const Vec2& p : points) {
    const double r = (p - center).norm() - radius;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(points.size()));
}

Circle refine_circle(const std::vector<Vec2>& points, const Circle& initial, int max_iterations) {
  Eigen::Vector3d x(initial.center.x(), initial.center.y(), initial.radius);
  auto cost = [&](const Eigen::Vector3d& v) {
    double s = 0.0;
    for (const Vec2& p : points) {
      const double r = (p - v.head<2>()).norm() - v(2);
      s += r * r;
    }
    return s;
  };
  double current = cost(x);
  double lambda = 1e-3;
  for (int iter = 0; iter < max_iterations && current > 0.0; ++iter) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (const Vec2& p : points) {
      const Vec2 d = p - x.head<2>();
      const double n = d.norm();
      if (n == 0.0) continue;
      const Eigen::Vector3d j(-d.x() / n, -d.y() / n, -1.0);
      const double r = n - x(2);
      jtj += j * j.transpose();
      jtr += j * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 10; ++attempt) {
      Eigen::Matrix3d a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector3d step = a.ldlt().solve(-jtr);
      const Eigen::Vector3d trial = x + step;
      const double c = trial.allFinite() ? cost(trial) : current;
      if (c < current) {
        const double gain = current - c;
        x = trial;
        current = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = gain > 1e-15 * std::max(current, 1e-30);
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  Circle out{x.head<2>(), x(2), 0.0};
  if (!(out.radius > 0.0)) return initial;
  out.rms = circle_rms(points, out.center, out.radius);
  if (out.rms > initial.rms) return initial;
  return out;
}

Circle fit_circle(const std::vector<Vec2>& points) { return refine_circle(points, fit_circle_kasa(points)); }

double arc_coverage_deg(const std::vector<Vec2>& points, const Vec2& center) {
  if (points.size() < 2) return 0.0;
  std::vector<double> angles;
  angles.reserve(points.size());
  for (const Vec2& p : points) angles.push_back(std::atan2(p.y() - center.y(), p.x() - center.x()));
  std::sort(angles.begin(), angles.end());
  double widest = angles.front() + 2.0 * std::numbers::pi - angles.back();
  for (std::size_t i = 1; i < angles.size(); ++i) widest = std::max(widest, angles[i] - angles[i - 1]);
  return 360.0 - rad2deg(widest);
}

double Cylinder::axis_distance(const Vec3& p) const { return (p - point).cross(direction).norm(); }

Vec3 Cylinder::at_height(double z) const { return point + direction * ((z - point.z()) / direction.z()); }

namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;

// Parameters: axis point (x0, y0) at the fixed height z_ref, tilt (a, b)
// with direction (a, b, 1) / norm, radius.
struct CylinderModel {
  const std::vector<Vec3>& points;
  double z_ref;

  double residual(const Vec5& v, const Vec3& p, Eigen::Matrix<double, 1, 5>* jac) const {
    const Vec3 w(p.x() - v(0), p.y() - v(1), p.z() - z_ref);
    const Vec3 u(v(2), v(3), 1.0);
    const double uu = u.squaredNorm();
    const double wu = w.dot(u);
    const double ww = w.squaredNorm();
    const double d2 = std::max(ww - wu * wu / uu, 0.0);
    const double d = std::sqrt(d2);
    if (jac) {
      // d(d2)/dw = 2w - 2 (wu/uu) u ; d(d2)/du = -2 (wu/uu) w + 2 (wu^2/uu^2) u
      const Vec3 gw = 2.0 * w - 2.0 * (wu / uu) * u;
      const Vec3 gu = -2.0 * (wu / uu) * w + 2.0 * (wu * wu / (uu * uu)) * u;
      const double s = d > 1e-12 ? 0.5 / d : 0.0;
      (*jac)(0) = -gw.x() * s;
      (*jac)(1) = -gw.y() * s;
      (*jac)(2) = gu.x() * s;
      (*jac)(3) = gu.y() * s;
      (*jac)(4) = -1.0;
    }
    return d - v(4);
  }

  double cost(const Vec5& v) const {
    double s = 0.0;
    for (const Vec3& p : points) {
      const double r = residual(v, p, nullptr);
      s += r * r;
    }
    return s;
  }
};

}  // namespace

Cylinder fit_cylinder(const std::vector<Vec3>& points, int max_iterations) {
  if (points.size() < 10) throw FitFailed("cylinder fit needs at least 10 points");
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  double r0 = 0.0;
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const Vec3& p : points) {
    const Vec2 d = p.head<2>() - mean.head<2>();
    r0 += d.norm();
    scatter += d * d.transpose();
  }
  r0 /= static_cast<double>(points.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  if (!(r0 > 0.0) || eig.eigenvalues()(0) <= 1e-12 * std::max(eig.eigenvalues()(1), 1e-300)) {
    throw FitFailed("cylinder fit: points collinear in projection");
  }

  const CylinderModel model{points, mean.z()};
  Vec5 x;
  x << mean.x(), mean.y(), 0.0, 0.0, r0;
  double current = model.cost(x);
  double lambda = 1e-3;
  for (int iter = 0; iter < max_iterations && current > 0.0; ++iter) {
    Eigen::Matrix<double, 5, 5> jtj = Eigen::Matrix<double, 5, 5>::Zero();
    Vec5 jtr = Vec5::Zero();
    Eigen::Matrix<double, 1, 5> j;
    for (const Vec3& p : points) {
      const double r = model.residual(x, p, &j);
      jtj.noalias() += j.transpose() * j;
      jtr.noalias() += j.transpose() * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::Matrix<double, 5, 5> a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Vec5 step = a.ldlt().solve(-jtr);
      const Vec5 trial = x + step;
      const double c = trial.allFinite() ? model.cost(trial) : current;
      if (c < current) {
        const double gain = current - c;
        x = trial;
        current = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = gain > 1e-15 * std::max(current, 1e-30);
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  if (!x.allFinite() || !(x(4) > 0.0)) throw FitFailed("cylinder fit diverged");
  Cylinder c;
  c.point = Vec3(x(0), x(1), model.z_ref);
  c.direction = Vec3(x(2), x(3), 1.0).normalized();
  c.radius = x(4);
  c.rms = std::sqrt(current / static_cast<double>(points.size()));
  return c;
}

}  // namespace sylva::analysis
