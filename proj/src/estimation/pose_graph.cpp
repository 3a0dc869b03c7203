#include "sylva/estimation/pose_graph.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "sylva/common/json.hpp"

namespace sylva::estimation {

std::string to_string(EdgeKind kind) { return kind == EdgeKind::Odometry ? "odometry" : "loop"; }

std::size_t PoseGraph::loop_edge_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [](const PoseEdge& e) { return e.kind == EdgeKind::Loop; }));
}

int PoseGraph::add_node(const Pose4& estimate, const Pose4& odom_delta, const Information& info, double stamp,
                        int scan_id) {
  if (!estimate.is_finite() || !odom_delta.is_finite()) {
    throw InvalidPose("non-finite pose passed to add_node");
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({id, estimate, stamp, scan_id});
  if (id > 0) {
    edges_.push_back({id - 1, id, EdgeKind::Odometry, odom_delta, info});
  }
  return id;
}

void PoseGraph::add_edge(const PoseEdge& edge) {
  const int n = static_cast<int>(nodes_.size());
  if (edge.from < 0 || edge.to < 0 || edge.from >= n || edge.to >= n || edge.from == edge.to) {
    throw Error("edge references unknown nodes");
  }
  if (!edge.measurement.is_finite()) {
    throw InvalidPose("non-finite edge measurement");
  }
  edges_.push_back(edge);
}

std::vector<Pose4> PoseGraph::poses() const {
  std::vector<Pose4> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.pose);
  return out;
}

void PoseGraph::set_poses(const std::vector<Pose4>& poses) {
  if (poses.size() != nodes_.size()) {
    throw Error("pose count does not match node count");
  }
  for (std::size_t i = 0; i < poses.size(); ++i) nodes_[i].pose = poses[i];
}

Pose4 integrate_odometry(const Pose4& current, const Pose4& delta) { return current * delta; }

Information odometry_information(const sim::DriftModel& drift, double length) {
  constexpr double kMinSigmaXY = 1e-3;
  constexpr double kMinSigmaYaw = 1e-4;
  const double l = std::max(length, 0.0);
  const double sxy = std::max(drift.translation_noise * std::sqrt(l), kMinSigmaXY);
  const double sz = std::max(drift.z_noise * std::sqrt(l), kMinSigmaXY);
  const double syaw = std::max(std::hypot(drift.yaw_noise * std::sqrt(l), drift.yaw_bias * l), kMinSigmaYaw);
  return {1.0 / (sxy * sxy), 1.0 / (sz * sz), 1.0 / (syaw * syaw)};
}

Information LoopClosureParams::information() const {
  return {1.0 / (sigma_xy * sigma_xy), 1.0 / (sigma_z * sigma_z), 1.0 / (sigma_yaw * sigma_yaw)};
}

void to_json(Json& j, const LoopClosureParams& p) {
  j = Json{{"radius_min", p.radius_min},         {"radius_max", p.radius_max}, {"exclude_recent", p.exclude_recent},
           {"effective_range", p.effective_range}, {"max_edges", p.max_edges},   {"sigma_xy", p.sigma_xy},
           {"sigma_z", p.sigma_z},               {"sigma_yaw", p.sigma_yaw}};
}

void from_json(const Json& j, LoopClosureParams& p) {
  p = LoopClosureParams{};
  p.radius_min = value_or(j, "radius_min", p.radius_min);
  p.radius_max = value_or(j, "radius_max", p.radius_max);
  p.exclude_recent = value_or(j, "exclude_recent", p.exclude_recent);
  p.effective_range = value_or(j, "effective_range", p.effective_range);
  p.max_edges = value_or(j, "max_edges", p.max_edges);
  p.sigma_xy = value_or(j, "sigma_xy", p.sigma_xy);
  p.sigma_z = value_or(j, "sigma_z", p.sigma_z);
  p.sigma_yaw = value_or(j, "sigma_yaw", p.sigma_yaw);
  if (p.radius_min < 0.0 || p.radius_max < p.radius_min || p.exclude_recent < 0 || p.max_edges < 0 ||
      !(p.sigma_xy > 0.0) || !(p.sigma_z > 0.0) || !(p.sigma_yaw > 0.0)) {
    throw ConfigError("invalid loop closure parameters");
  }
}

std::vector<PoseEdge> detect_loop_closures(PoseGraph& graph, int current, const std::vector<Pose4>& true_poses,
                                           const LoopClosureParams& params, Rng& noise) {
  std::vector<PoseEdge> accepted;
  if (current < 0 || current >= static_cast<int>(graph.size()) ||
      true_poses.size() < graph.size()) {
    return accepted;
  }
  const Vec2 here = graph.node(current).pose.t.head<2>();
  std::vector<std::pair<double, int>> candidates;
  for (int id = 0; id + params.exclude_recent < current; ++id) {
    const double d = (graph.node(id).pose.t.head<2>() - here).norm();
    if (d >= params.radius_min && d <= params.radius_max) {
      candidates.emplace_back(d, id);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  const Information info = params.information();
  auto bounded = [&](double sigma) { return sigma * std::clamp(draw_normal(noise), -3.0, 3.0); };
  for (const auto& [d, id] : candidates) {
    if (static_cast<int>(accepted.size()) >= params.max_edges) break;
    const Pose4 truth = true_poses[id].between(true_poses[current]);
    // Noise is drawn for every attempt so the stream does not depend on the outcome.
    const Vec3 dt(bounded(params.sigma_xy), bounded(params.sigma_xy), bounded(params.sigma_z));
    const double dyaw = bounded(params.sigma_yaw);
    if (truth.t.head<2>().norm() > params.effective_range) {
      continue;  // registration fails to converge
    }
    PoseEdge e{id, current, EdgeKind::Loop, Pose4(truth.t + dt, wrap_angle(truth.yaw + dyaw)), info};
    graph.add_edge(e);
    accepted.push_back(e);
  }
  return accepted;
}

namespace {

struct Residual {
  Eigen::Vector4d r;
  Eigen::Matrix4d Ji;  // d r / d (x_i, y_i, z_i, yaw_i)
  Eigen::Matrix4d Jj;
};

Residual edge_residual(const Pose4& pi, const Pose4& pj, const Pose4& z) {
  const double c = std::cos(pi.yaw);
  const double s = std::sin(pi.yaw);
  const Vec3 d = pj.t - pi.t;
  Residual out;
  out.r << c * d.x() + s * d.y() - z.t.x(), -s * d.x() + c * d.y() - z.t.y(), d.z() - z.t.z(),
      wrap_angle(pj.yaw - pi.yaw - z.yaw);
  out.Ji.setZero();
  out.Jj.setZero();
  out.Ji(0, 0) = -c;
  out.Ji(0, 1) = -s;
  out.Ji(1, 0) = s;
  out.Ji(1, 1) = -c;
  out.Ji(0, 3) = -s * d.x() + c * d.y();
  out.Ji(1, 3) = -c * d.x() - s * d.y();
  out.Ji(2, 2) = -1.0;
  out.Ji(3, 3) = -1.0;
  out.Jj(0, 0) = c;
  out.Jj(0, 1) = s;
  out.Jj(1, 0) = -s;
  out.Jj(1, 1) = c;
  out.Jj(2, 2) = 1.0;
  out.Jj(3, 3) = 1.0;
  return out;
}

Eigen::Vector4d weights(const Information& info) { return {info.xy, info.xy, info.z, info.yaw}; }

}  // namespace

double graph_cost(const PoseGraph& graph, const std::vector<Pose4>& poses) {
  double cost = 0.0;
  for (const auto& e : graph.edges()) {
    const Residual res = edge_residual(poses[e.from], poses[e.to], e.measurement);
    cost += res.r.cwiseProduct(weights(e.info)).dot(res.r);
  }
  return cost;
}

double graph_cost(const PoseGraph& graph) { return graph_cost(graph, graph.poses()); }

OptimizationResult optimize_graph(PoseGraph& graph, const OptimizerParams& params) {
  OptimizationResult result;
  std::vector<Pose4> poses = graph.poses();
  double cost = graph_cost(graph, poses);
  result.initial_cost = cost;
  result.final_cost = cost;
  const int n = static_cast<int>(poses.size());
  if (n < 2 || graph.edges().empty()) {
    result.converged = true;
    return result;
  }
  const int dim = 4 * (n - 1);  // node 0 is fixed
  double lambda = 0.0;

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    result.iterations = iter + 1;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(graph.edges().size() * 64);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    for (const auto& e : graph.edges()) {
      const Residual res = edge_residual(poses[e.from], poses[e.to], e.measurement);
      const Eigen::Matrix4d W = weights(e.info).asDiagonal();
      const int idx[2] = {e.from - 1, e.to - 1};
      const Eigen::Matrix4d* J[2] = {&res.Ji, &res.Jj};
      for (int a = 0; a < 2; ++a) {
        if (idx[a] < 0) continue;
        b.segment<4>(4 * idx[a]) += J[a]->transpose() * W * res.r;
        for (int c = 0; c < 2; ++c) {
          if (idx[c] < 0) continue;
          const Eigen::Matrix4d block = J[a]->transpose() * W * *J[c];
          for (int r = 0; r < 4; ++r)
            for (int k = 0; k < 4; ++k) triplets.emplace_back(4 * idx[a] + r, 4 * idx[c] + k, block(r, k));
        }
      }
    }
    Eigen::SparseMatrix<double> H(dim, dim);
    H.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::VectorXd diag = H.diagonal();

    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      Eigen::SparseMatrix<double> A = H;
      if (lambda > 0.0) {
        for (int i = 0; i < dim; ++i) A.coeffRef(i, i) += lambda * std::max(diag[i], 1e-12);
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
      Eigen::VectorXd dx;
      bool ok = solver.info() == Eigen::Success;
      if (ok) {
        dx = solver.solve(-b);
        ok = solver.info() == Eigen::Success && dx.allFinite();
      }
      if (ok) {
        std::vector<Pose4> trial = poses;
        for (int i = 1; i < n; ++i) {
          const auto step = dx.segment<4>(4 * (i - 1));
          trial[i].t += step.head<3>();
          trial[i].yaw = wrap_angle(trial[i].yaw + step[3]);
        }
        const double trial_cost = graph_cost(graph, trial);
        if (trial_cost <= cost) {
          const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
          poses = std::move(trial);
          cost = trial_cost;
          accepted = true;
          lambda = lambda > 0.0 ? lambda * 0.1 : 0.0;
          if (lambda < 1e-8) lambda = 0.0;
          if (rel < params.relative_tolerance) {
            result.converged = true;
          }
          break;
        }
      }
      lambda = lambda > 0.0 ? lambda * 10.0 : 1e-4;
      result.damped = true;
    }
    if (!accepted) {
      result.converged = true;  // no descent direction left at this precision
      break;
    }
    if (result.converged || cost == 0.0) {
      result.converged = true;
      break;
    }
  }
  graph.set_poses(poses);
  result.final_cost = cost;
  return result;
}

namespace {

void write_info_row(std::ostringstream& out, const Information& info) {
  constexpr double kTilt = 1e6;
  const double diag[6] = {info.xy, info.xy, info.z, kTilt, kTilt, info.yaw};
  for (int r = 0; r < 6; ++r)
    for (int c = r; c < 6; ++c) out << ' ' << (r == c ? diag[r] : 0.0);
}

void write_pose(std::ostringstream& out, const Pose4& p) {
  out << ' ' << p.t.x() << ' ' << p.t.y() << ' ' << p.t.z() << " 0 0 " << std::sin(0.5 * p.yaw) << ' '
      << std::cos(0.5 * p.yaw);
}

}  // namespace

std::string to_g2o(const PoseGraph& graph) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (const auto& n : graph.nodes()) {
    out << "VERTEX_SE3:QUAT " << n.id;
    write_pose(out, n.pose);
    out << '\n';
  }
  if (!graph.empty()) out << "FIX 0\n";
  for (const auto& e : graph.edges()) {
    out << "EDGE_SE3:QUAT " << e.from << ' ' << e.to;
    write_pose(out, e.measurement);
    write_info_row(out, e.info);
    out << '\n';
  }
  return out.str();
}

void write_g2o(const std::filesystem::path& path, const PoseGraph& graph) { write_text_file(path, to_g2o(graph)); }

Json graph_json(const PoseGraph& graph) {
  Json nodes = Json::array();
  for (const auto& n : graph.nodes()) {
    nodes.push_back({{"id", n.id}, {"pose", n.pose}, {"stamp", n.stamp}});
  }
  Json edges = Json::array();
  for (const auto& e : graph.edges()) {
    edges.push_back({{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

}  // namespace sylva::estimation
