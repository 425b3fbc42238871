#pragma once

// Vertex addressing on the d-regular tree rooted at an arbitrary vertex,
// distances, balls and the canonical simple path.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "treewave/error.hpp"

namespace treewave {

/// Path-from-root address. The root is the empty address; the first step
/// picks one of d neighbours (0..d-1), every later step one of the d-1
/// children away from the root (0..d-2).
class VertexId {
 public:
  VertexId() = default;
  explicit VertexId(std::vector<int> steps) : steps_(std::move(steps)) {}

  static VertexId root() { return {}; }

  int depth() const { return static_cast<int>(steps_.size()); }
  const std::vector<int>& steps() const { return steps_; }
  bool is_root() const { return steps_.empty(); }

  bool valid_for(int d) const {
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      const int bound = i == 0 ? d : d - 1;
      if (steps_[i] < 0 || steps_[i] >= bound) return false;
    }
    return true;
  }

  VertexId child(int index) const {
    auto steps = steps_;
    steps.push_back(index);
    return VertexId(std::move(steps));
  }

  VertexId parent() const {
    detail::require(!is_root(), "the root has no parent");
    return VertexId(std::vector<int>(steps_.begin(), steps_.end() - 1));
  }

  /// Slash-joined steps; "" for the root.
  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      if (i) out += '/';
      out += std::to_string(steps_[i]);
    }
    return out;
  }

  static VertexId parse(std::string_view text) {
    std::vector<int> steps;
    if (text.empty()) return VertexId();
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto slash = text.find('/', start);
      const auto piece = text.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
      detail::require(!piece.empty() && std::all_of(piece.begin(), piece.end(), [](char c) { return c >= '0' && c <= '9'; }),
                      "malformed vertex address '" + std::string(text) + "'");
      steps.push_back(std::stoi(std::string(piece)));
      if (slash == std::string_view::npos) break;
      start = slash + 1;
    }
    return VertexId(std::move(steps));
  }

  friend auto operator<=>(const VertexId&, const VertexId&) = default;

 private:
  std::vector<int> steps_;
};

/// Graph distance: depth(u) + depth(v) - 2 depth(lca(u, v)).
inline int distance(const VertexId& u, const VertexId& v, int d) {
  detail::require(u.valid_for(d), "malformed address '" + u.to_string() + "' for d=" + std::to_string(d));
  detail::require(v.valid_for(d), "malformed address '" + v.to_string() + "' for d=" + std::to_string(d));
  const auto& a = u.steps();
  const auto& b = v.steps();
  const auto common = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
  const int lca_depth = static_cast<int>(common.first - a.begin());
  return u.depth() + v.depth() - 2 * lca_depth;
}

/// |sphere of radius k| = d (d-1)^{k-1} for k >= 1.
inline std::int64_t sphere_size(int d, int k) {
  if (k == 0) return 1;
  std::int64_t size = d;
  for (int i = 1; i < k; ++i) size *= d - 1;
  return size;
}

inline std::int64_t ball_size(int d, int r) {
  std::int64_t total = 0;
  for (int k = 0; k <= r; ++k) total += sphere_size(d, k);
  return total;
}

/// The ball of radius r around the root, in breadth-first order, with the
/// parent/children structure needed to walk edges by position.
struct Ball {
  int d = 3;
  int radius = 0;
  std::vector<VertexId> vertices;
  std::map<VertexId, int> index;
  std::vector<int> parent;                 // -1 for the root
  std::vector<std::vector<int>> children;  // positions, in address order
  std::vector<int> sphere_begin;           // sphere k occupies [sphere_begin[k], sphere_begin[k+1])

  std::size_t size() const { return vertices.size(); }
  int depth(int position) const { return vertices[position].depth(); }
  bool interior(int position) const { return depth(position) < radius; }
  std::int64_t sphere_count(int k) const { return sphere_begin[k + 1] - sphere_begin[k]; }
};

inline constexpr std::int64_t kDefaultVertexBudget = 1'000'000;

inline Ball enumerate_ball(int d, int r, std::int64_t vertex_budget = kDefaultVertexBudget) {
  detail::require(d >= 3, "enumerate_ball: d must be at least 3");
  detail::require(r >= 0, "enumerate_ball: radius must be non-negative");
  const auto expected = ball_size(d, r);
  detail::require(expected <= vertex_budget, "ball of radius " + std::to_string(r) + " has " + std::to_string(expected) +
                                                 " vertices, over the budget of " + std::to_string(vertex_budget));
  Ball ball;
  ball.d = d;
  ball.radius = r;
  ball.vertices.reserve(expected);
  ball.parent.reserve(expected);
  ball.vertices.push_back(VertexId::root());
  ball.parent.push_back(-1);
  ball.sphere_begin.push_back(0);
  for (int k = 0; k < r; ++k) {
    const int begin = ball.sphere_begin.back();
    const int end = static_cast<int>(ball.vertices.size());
    ball.sphere_begin.push_back(end);
    for (int p = begin; p < end; ++p) {
      const int fanout = k == 0 ? d : d - 1;
      for (int c = 0; c < fanout; ++c) {
        ball.vertices.push_back(ball.vertices[p].child(c));
        ball.parent.push_back(p);
      }
    }
  }
  ball.sphere_begin.push_back(static_cast<int>(ball.vertices.size()));
  ball.children.assign(ball.vertices.size(), {});
  for (std::size_t i = 0; i < ball.vertices.size(); ++i) {
    ball.index.emplace(ball.vertices[i], static_cast<int>(i));
    if (ball.parent[i] >= 0) ball.children[ball.parent[i]].push_back(static_cast<int>(i));
  }
  return ball;
}

/// Root-descending chain root, [0], [0,0], ... of n vertices. Any simple
/// path of the same length has the same joint law under an invariant process.
inline std::vector<VertexId> canonical_path(int d, int n) {
  detail::require(d >= 3, "canonical_path: d must be at least 3");
  detail::require(n >= 1, "canonical_path: need at least one vertex");
  std::vector<VertexId> path;
  path.reserve(n);
  path.push_back(VertexId::root());
  for (int i = 1; i < n; ++i) path.push_back(path.back().child(0));
  return path;
}

}  // namespace treewave
