#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sylva/common/error.hpp"
#include "sylva/common/geometry.hpp"
#include "sylva/common/json.hpp"
#include "sylva/common/random.hpp"
#include "sylva/sim/robot.hpp"

namespace sylva::estimation {

enum class EdgeKind { Odometry, Loop };

std::string to_string(EdgeKind kind);

/// Diagonal information (inverse variance) for a 4-DOF relative pose.
struct Information {
  double xy = 1.0;
  double z = 1.0;
  double yaw = 1.0;

  bool operator==(const Information&) const = default;
};

struct PoseNode {
  int id = 0;
  Pose4 pose;          // optimized estimate, map frame
  double stamp = 0.0;  // s
  int scan_id = -1;    // index into the runner's scan log, -1 when not kept
};

struct PoseEdge {
  int from = 0;
  int to = 0;
  EdgeKind kind = EdgeKind::Odometry;
  Pose4 measurement;  // pose of `to` expressed in `from`
  Information info;
};

class InvalidPose : public Error {
 public:
  using Error::Error;
};

class PoseGraph {
 public:
  const std::vector<PoseNode>& nodes() const { return nodes_; }
  const std::vector<PoseEdge>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const PoseNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const PoseNode& back() const { return nodes_.back(); }
  std::size_t loop_edge_count() const;

  /// Appends a node; from the second node on, also an odometry edge from the
  /// previous node carrying `odom_delta`. Throws InvalidPose on non-finite input.
  int add_node(const Pose4& estimate, const Pose4& odom_delta, const Information& info, double stamp = 0.0,
               int scan_id = -1);
  void add_edge(const PoseEdge& edge);

  std::vector<Pose4> poses() const;
  void set_poses(const std::vector<Pose4>& poses);

 private:
  std::vector<PoseNode> nodes_;
  std::vector<PoseEdge> edges_;
};

Pose4 integrate_odometry(const Pose4& current, const Pose4& delta);

/// Odometry-edge information derived from the drift model over a step of
/// `length` metres. Sigmas are floored so a noise-free model stays finite.
Information odometry_information(const sim::DriftModel& drift, double length);

struct LoopClosureParams {
  double radius_min = 10.0;
  double radius_max = 15.0;
  int exclude_recent = 10;
  double effective_range = 15.0;
  int max_edges = 3;
  double sigma_xy = 0.02;   // registration noise, m
  double sigma_z = 0.02;    // m
  double sigma_yaw = 0.002; // rad

  Information information() const;
};

void to_json(Json& j, const LoopClosureParams& p);
void from_json(const Json& j, LoopClosureParams& p);

/// Candidate search on estimated positions, verification on true poses.
/// Accepted edges are appended to the graph and returned.
std::vector<PoseEdge> detect_loop_closures(PoseGraph& graph, int current, const std::vector<Pose4>& true_poses,
                                           const LoopClosureParams& params, Rng& noise);

struct OptimizerParams {
  int max_iterations = 50;
  double relative_tolerance = 1e-9;
};

struct OptimizationResult {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  bool damped = false;  // a Levenberg step was needed
};

/// Weighted sum of squared edge residuals for the given poses.
double graph_cost(const PoseGraph& graph, const std::vector<Pose4>& poses);
double graph_cost(const PoseGraph& graph);

/// Batch 4-DOF Gauss-Newton with Levenberg fallback; node 0 is the gauge.
/// Steps that would raise the cost are never accepted.
OptimizationResult optimize_graph(PoseGraph& graph, const OptimizerParams& params = {});

/// g2o text: VERTEX_SE3:QUAT and EDGE_SE3:QUAT rows with 6x6 information
/// (roll/pitch rows carry a fixed large weight).
std::string to_g2o(const PoseGraph& graph);
void write_g2o(const std::filesystem::path& path, const PoseGraph& graph);

Json graph_json(const PoseGraph& graph);

}  // namespace sylva::estimation
