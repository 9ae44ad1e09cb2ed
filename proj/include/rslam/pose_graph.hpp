#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "rslam/loop_closure.hpp"
#include "rslam/map.hpp"
#include "rslam/se2.hpp"

namespace rslam {

enum class EdgeKind { kOdometry, kLoop };

struct PoseNode {
  int64_t id = -1;
  Pose2 pose;
};

struct PoseEdge {
  int64_t from = -1;
  int64_t to = -1;
  Pose2 relative;  // measured from^-1 * to
  Eigen::Matrix3d information = Eigen::Matrix3d::Identity();
  EdgeKind kind = EdgeKind::kOdometry;
};

struct PoseGraphParams {
  int max_iterations = 100;
  double rel_tolerance = 1e-9;
  double loop_huber_chi2 = 5.99;  // robust kernel on loop edges only
};

struct OptimizeResult {
  bool success = false;
  std::string message;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
};

namespace detail {

// e = log(T_ab^-1 (C_a^-1 C_b)) in the (dx, dy, dtheta) chart.
inline void edge_residual(const Pose2& a, const Pose2& b, const Pose2& measured,
                          Eigen::Vector3d* residual,
                          Eigen::Matrix3d* j_a, Eigen::Matrix3d* j_b) {
  const Pose2 d = relative_pose(a, b);
  const Pose2 e = compose(inverse(measured), d);
  (*residual)(0) = e.x;
  (*residual)(1) = e.y;
  (*residual)(2) = wrap_angle(e.theta);
  if (!j_a && !j_b) return;

  const double ca = std::cos(a.theta), sa = std::sin(a.theta);
  const double cm = std::cos(measured.theta), sm = std::sin(measured.theta);
  Eigen::Matrix2d r_a_inv, r_m_inv;
  r_a_inv << ca, sa, -sa, ca;
  r_m_inv << cm, sm, -sm, cm;
  Eigen::Matrix2d dr_a_inv;  // d/dtheta_a of R(-theta_a)
  dr_a_inv << -sa, ca, -ca, -sa;
  const Eigen::Vector2d dt(b.x - a.x, b.y - a.y);

  if (j_a) {
    j_a->setZero();
    j_a->block<2, 2>(0, 0) = -r_m_inv * r_a_inv;
    j_a->block<2, 1>(0, 2) = r_m_inv * dr_a_inv * dt;
    (*j_a)(2, 2) = -1.0;
  }
  if (j_b) {
    j_b->setZero();
    j_b->block<2, 2>(0, 0) = r_m_inv * r_a_inv;
    (*j_b)(2, 2) = 1.0;
  }
}

}  // namespace detail

// Keyframe pose graph with odometry and verified loop constraints. The
// optimizer is Levenberg-Marquardt over all nodes but the first, with a
// sparse normal-equation solve and a Huber kernel on loop edges.
class PoseGraph {
 public:
  bool add_node(int64_t id, const Pose2& pose) {
    if (index_of_.count(id)) return false;
    index_of_[id] = int(nodes_.size());
    nodes_.push_back({id, pose});
    return true;
  }

  bool has_node(int64_t id) const { return index_of_.count(id) > 0; }
  const std::vector<PoseNode>& nodes() const { return nodes_; }
  const std::vector<PoseEdge>& edges() const { return edges_; }

  const Pose2& pose_of(int64_t id) const {
    return nodes_[index_of_.at(id)].pose;
  }
  void set_pose(int64_t id, const Pose2& pose) {
    nodes_[index_of_.at(id)].pose = pose;
  }

  bool add_odometry_edge(int64_t from, int64_t to, const Pose2& measured,
                         const Eigen::Matrix3d& information) {
    return add_edge({from, to, measured, information, EdgeKind::kOdometry});
  }

  // Requires a verified candidate; the edge runs match -> query with the
  // ICP transform as the relative measurement.
  bool add_loop_edge(const LoopCandidate& candidate,
                     const Eigen::Matrix3d& information) {
    if (!candidate.relative) return false;
    return add_edge({candidate.match_id, candidate.query_id,
                     *candidate.relative,
                     information * std::max(candidate.inlier_fraction, 1e-3),
                     EdgeKind::kLoop});
  }

  int loop_edge_count() const {
    int n = 0;
    for (const PoseEdge& e : edges_) n += e.kind == EdgeKind::kLoop;
    return n;
  }

  OptimizeResult optimize(const PoseGraphParams& params = {}) {
    OptimizeResult result;
    if (nodes_.empty()) {
      result.message = "empty graph";
      return result;
    }
    // connectivity to the fixed node
    {
      std::vector<int> parent(nodes_.size());
      for (size_t i = 0; i < parent.size(); ++i) parent[i] = int(i);
      std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
      };
      for (const PoseEdge& e : edges_)
        parent[find(index_of_.at(e.from))] = find(index_of_.at(e.to));
      for (size_t i = 0; i < nodes_.size(); ++i)
        if (find(int(i)) != find(0)) {
          result.message = "gauge error: node " + std::to_string(nodes_[i].id) +
                           " not connected to the fixed node";
          return result;
        }
    }

    auto total_cost = [&](const std::vector<PoseNode>& nodes) {
      double cost = 0;
      Eigen::Vector3d r;
      for (const PoseEdge& e : edges_) {
        detail::edge_residual(nodes[index_of_.at(e.from)].pose,
                              nodes[index_of_.at(e.to)].pose, e.relative, &r,
                              nullptr, nullptr);
        const double chi2 = r.dot(e.information * r);
        if (e.kind == EdgeKind::kLoop && chi2 > params.loop_huber_chi2)
          cost += 2.0 * std::sqrt(params.loop_huber_chi2 * chi2) -
                  params.loop_huber_chi2;
        else
          cost += chi2;
      }
      return cost;
    };

    double cost = total_cost(nodes_);
    result.initial_cost = cost;
    const int n_free = int(nodes_.size()) - 1;  // node 0 fixed
    if (n_free <= 0) {
      result.success = true;
      result.final_cost = cost;
      return result;
    }

    double lambda = 1e-8;
    for (int iter = 0; iter < params.max_iterations; ++iter) {
      ++result.iterations;
      std::vector<Eigen::Triplet<double>> triplets;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n_free);
      Eigen::Vector3d r;
      Eigen::Matrix3d ja, jb;
      std::vector<double> diag(3 * n_free, 0.0);

      auto free_index = [&](int64_t id) {
        const int idx = index_of_.at(id);
        return idx == 0 ? -1 : idx - 1;
      };
      for (const PoseEdge& e : edges_) {
        const int fa = free_index(e.from), fb = free_index(e.to);
        detail::edge_residual(nodes_[index_of_.at(e.from)].pose,
                              nodes_[index_of_.at(e.to)].pose, e.relative, &r,
                              fa >= 0 ? &ja : nullptr, fb >= 0 ? &jb : nullptr);
        Eigen::Matrix3d info = e.information;
        if (e.kind == EdgeKind::kLoop) {
          const double chi2 = r.dot(info * r);
          if (chi2 > params.loop_huber_chi2)
            info *= std::sqrt(params.loop_huber_chi2 / chi2);
        }
        auto accumulate = [&](int row_block, const Eigen::Matrix3d& j_row,
                              int col_block, const Eigen::Matrix3d& j_col) {
          const Eigen::Matrix3d h = j_row.transpose() * info * j_col;
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
              triplets.emplace_back(3 * row_block + i, 3 * col_block + j,
                                    h(i, j));
        };
        if (fa >= 0) {
          accumulate(fa, ja, fa, ja);
          rhs.segment<3>(3 * fa) -= ja.transpose() * info * r;
        }
        if (fb >= 0) {
          accumulate(fb, jb, fb, jb);
          rhs.segment<3>(3 * fb) -= jb.transpose() * info * r;
        }
        if (fa >= 0 && fb >= 0) {
          accumulate(fa, ja, fb, jb);
          accumulate(fb, jb, fa, ja);
        }
      }
      Eigen::SparseMatrix<double> h(3 * n_free, 3 * n_free);
      h.setFromTriplets(triplets.begin(), triplets.end());
      for (int i = 0; i < 3 * n_free; ++i) diag[i] = h.coeff(i, i);
      for (int i = 0; i < 3 * n_free; ++i)
        h.coeffRef(i, i) = diag[i] + lambda * (diag[i] + 1e-12);

      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(h);
      if (solver.info() != Eigen::Success) {
        lambda *= 10;
        continue;
      }
      const Eigen::VectorXd delta = solver.solve(rhs);

      std::vector<PoseNode> candidate = nodes_;
      for (size_t i = 1; i < candidate.size(); ++i) {
        const int f = int(i) - 1;
        candidate[i].pose = Pose2(candidate[i].pose.theta + delta[3 * f + 2],
                                  candidate[i].pose.x + delta[3 * f],
                                  candidate[i].pose.y + delta[3 * f + 1]);
      }
      const double new_cost = total_cost(candidate);
      if (new_cost <= cost) {
        const double drop = cost - new_cost;
        nodes_ = std::move(candidate);
        cost = new_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        if (drop < params.rel_tolerance * std::max(cost, 1e-30)) break;
      } else {
        lambda *= 5.0;
        if (lambda > 1e10) break;
      }
    }
    result.success = true;
    result.final_cost = cost;
    return result;
  }

  // Plain-text dump: "node id x y theta" and
  // "edge from to dx dy dtheta i11 i12 i13 i22 i23 i33".
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write pose graph: " + path);
    out.precision(17);
    for (const PoseNode& n : nodes_)
      out << "node " << n.id << ' ' << n.pose.x << ' ' << n.pose.y << ' '
          << n.pose.theta << '\n';
    for (const PoseEdge& e : edges_) {
      out << "edge " << e.from << ' ' << e.to << ' ' << e.relative.x << ' '
          << e.relative.y << ' ' << e.relative.theta;
      const Eigen::Matrix3d& m = e.information;
      out << ' ' << m(0, 0) << ' ' << m(0, 1) << ' ' << m(0, 2) << ' '
          << m(1, 1) << ' ' << m(1, 2) << ' ' << m(2, 2) << '\n';
    }
  }

  static PoseGraph load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read pose graph: " + path);
    PoseGraph graph;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string tag;
      ss >> tag;
      if (tag == "node") {
        int64_t id;
        double x, y, theta;
        ss >> id >> x >> y >> theta;
        graph.add_node(id, Pose2(theta, x, y));
      } else if (tag == "edge") {
        PoseEdge e;
        double x, y, theta, i11, i12, i13, i22, i23, i33;
        ss >> e.from >> e.to >> x >> y >> theta >> i11 >> i12 >> i13 >> i22 >>
            i23 >> i33;
        e.relative = Pose2(theta, x, y);
        e.information << i11, i12, i13, i12, i22, i23, i13, i23, i33;
        // consecutive ids are odometry by construction
        e.kind = e.to == e.from + 1 ? EdgeKind::kOdometry : EdgeKind::kLoop;
        graph.add_edge(e);
      }
    }
    return graph;
  }

 private:
  bool add_edge(PoseEdge edge) {
    if (!index_of_.count(edge.from) || !index_of_.count(edge.to)) return false;
    if (edge.from == edge.to) return false;
    const auto key = std::make_tuple(edge.from, edge.to, edge.kind);
    if (!edge_keys_.insert(key).second) return false;  // duplicate
    edges_.push_back(std::move(edge));
    return true;
  }

  std::vector<PoseNode> nodes_;
  std::vector<PoseEdge> edges_;
  std::map<int64_t, int> index_of_;
  std::set<std::tuple<int64_t, int64_t, EdgeKind>> edge_keys_;
};

// Applies optimized keyframe poses to the map: keyframes take their new
// poses, every map point is re-anchored through its creator keyframe.
inline void update_map(Map& map, const std::map<int64_t, Pose2>& new_poses) {
  std::map<int64_t, Pose2> old_poses;
  for (auto& [id, kf] : map.keyframes) {
    auto it = new_poses.find(id);
    if (it == new_poses.end()) continue;
    old_poses[id] = kf.pose;
    kf.pose = it->second;
  }
  for (auto& [pid, mp] : map.points) {
    auto old_it = old_poses.find(mp.creator_id);
    if (old_it == old_poses.end()) continue;
    const Pose2& now = map.keyframes.at(mp.creator_id).pose;
    mp.position = transform_point(compose(now, inverse(old_it->second)),
                                  mp.position);
  }
}

}  // namespace rslam
