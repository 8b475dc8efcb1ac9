#include "fshapes/synth.hpp"

#include "fshapes/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

namespace fshapes {

namespace {

Cells to_cells(const std::vector<std::array<int, 3>>& tris) {
  Cells c(static_cast<Index>(tris.size()), 3);
  for (std::size_t i = 0; i < tris.size(); ++i) {
    for (int j = 0; j < 3; ++j) c(static_cast<Index>(i), j) = tris[i][static_cast<std::size_t>(j)];
  }
  return c;
}

Points to_points(const std::vector<Eigen::Vector3d>& v) {
  Points p(static_cast<Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<Index>(i)) = v[i].transpose();
  return p;
}

}  // namespace

FShapeMesh icosphere(Index min_points, double radius) {
  if (min_points < 1) throw ValidationError("icosphere needs a positive point count");
  if (!(radius > 0.0)) throw ValidationError("radius must be positive");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                    {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  while (static_cast<Index>(v.size()) < min_points) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]);
      const int b = midpoint(tri[1], tri[2]);
      const int c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  FShapeMesh m;
  m.vertices = radius * to_points(v);
  m.signal = Signal::Zero(m.vertices.rows());
  m.cells = to_cells(f);
  return m;
}

FShapeMesh ellipsoid(Index min_points, const Eigen::Vector3d& semi_axes) {
  if (!(semi_axes.minCoeff() > 0.0)) throw ValidationError("semi-axes must be positive");
  FShapeMesh m = icosphere(min_points);
  m.vertices = m.vertices * semi_axes.asDiagonal();
  return m;
}

FShapeMesh flat_square(Index per_side, double side, const Eigen::Vector2d& center) {
  if (per_side < 2) throw ValidationError("a square needs at least 2 vertices per side");
  if (!(side > 0.0)) throw ValidationError("side must be positive");
  const int m = static_cast<int>(per_side);
  const double h = side / (m - 1);
  FShapeMesh out;
  out.vertices.resize(per_side * per_side, 3);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      out.vertices.row(j * m + i) << center.x() - side / 2 + i * h, center.y() - side / 2 + j * h, 0.0;
    }
  }
  std::vector<std::array<int, 3>> tris;
  for (int j = 0; j + 1 < m; ++j) {
    for (int i = 0; i + 1 < m; ++i) {
      const int a = j * m + i;
      tris.push_back({a, a + 1, a + m + 1});
      tris.push_back({a, a + m + 1, a + m});
    }
  }
  out.cells = to_cells(tris);
  out.signal = Signal::Zero(out.vertices.rows());
  return out;
}

FShapeMesh holed_square(Index approx_points, double hole_half) {
  if (!(hole_half > 0.0 && hole_half < 1.0)) throw ValidationError("hole half-width must lie in (0, 1)");
  // Vertex count ~ m^2 (1 - hole_half^2); the grid has an even number of
  // intervals so the origin is a grid point.
  int half = static_cast<int>(std::lround(std::sqrt(approx_points / (1.0 - hole_half * hole_half)) / 2.0));
  half = std::max(half, 3);
  const int m = 2 * half + 1;
  const double h = 1.0 / half;
  const int hole = std::clamp(static_cast<int>(std::lround(hole_half / h)), 1, half - 1);

  std::vector<int> id(static_cast<std::size_t>(m * m), -1);
  std::vector<Eigen::Vector3d> v;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      if (std::abs(i - half) < hole && std::abs(j - half) < hole) continue;
      id[static_cast<std::size_t>(j * m + i)] = static_cast<int>(v.size());
      v.emplace_back((i - half) * h, (j - half) * h, 0.0);
    }
  }
  std::vector<std::array<int, 3>> tris;
  for (int j = 0; j + 1 < m; ++j) {
    for (int i = 0; i + 1 < m; ++i) {
      // Cell [i, i+1] x [j, j+1] lies in the hole when its center does.
      if (std::abs(2 * (i - half) + 1) < 2 * hole && std::abs(2 * (j - half) + 1) < 2 * hole) continue;
      const int a = id[static_cast<std::size_t>(j * m + i)];
      const int b = id[static_cast<std::size_t>(j * m + i + 1)];
      const int c = id[static_cast<std::size_t>((j + 1) * m + i + 1)];
      const int d = id[static_cast<std::size_t>((j + 1) * m + i)];
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  }
  FShapeMesh out;
  out.vertices = to_points(v);
  out.cells = to_cells(tris);
  out.signal = Signal::Zero(out.vertices.rows());
  return out;
}

std::pair<FShapeMesh, FShapeMesh> overlapping_squares(Index source_per_side, Index target_per_side,
                                                      double source_side, double target_side, double lift) {
  FShapeMesh source = flat_square(source_per_side, source_side);
  FShapeMesh target = flat_square(target_per_side, target_side);
  target.vertices.col(2).array() += lift;
  target.signal.setOnes();
  return {std::move(source), std::move(target)};
}

Signal half_pattern(const Points& x, int axis, double sharpness) {
  if (axis < 0 || axis >= x.cols()) throw ValidationError("pattern axis out of range");
  return (sharpness * x.col(axis).array()).tanh().matrix();
}

FShapeMesh jitter(const FShapeMesh& mesh, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = mesh.ambient_dim();
  const Eigen::RowVectorXd lo = mesh.vertices.colwise().minCoeff();
  const Eigen::RowVectorXd hi = mesh.vertices.colwise().maxCoeff();
  const double scale = (hi - lo).norm();
  FShapeMesh out = mesh;
  for (int bump = 0; bump < 4; ++bump) {
    Eigen::RowVectorXd c(n), dir(n);
    for (int k = 0; k < n; ++k) c(k) = lo(k) + (hi(k) - lo(k)) * std::uniform_real_distribution<double>(0, 1)(rng);
    for (int k = 0; k < n; ++k) dir(k) = normal(rng);
    const double width = 0.5 * scale;
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      const double r2 = (mesh.vertices.row(v) - c).squaredNorm() / (width * width);
      out.vertices.row(v) += amplitude * std::exp(-r2) * dir;
    }
  }
  return out;
}

std::vector<FShapeMesh> synth(const std::string& name, Index points, std::uint64_t seed, double noise) {
  if (points < 4) throw ValidationError("synthetic shapes need at least 4 points");
  std::vector<FShapeMesh> out;
  if (name == "sphere") {
    out.push_back(icosphere(points));
    out.back().signal = half_pattern(out.back().vertices);
  } else if (name == "ellipsoid") {
    out.push_back(ellipsoid(points, Eigen::Vector3d(1.5, 1.0, 0.75)));
    out.back().signal = half_pattern(out.back().vertices, 0);
  } else if (name == "square") {
    const auto side = static_cast<Index>(std::max(2.0, std::round(std::sqrt(static_cast<double>(points)))));
    out.push_back(flat_square(side, 2.0));
    out.back().signal = half_pattern(out.back().vertices, 0);
  } else if (name == "holed-square") {
    out.push_back(holed_square(points));
    out.back().signal = half_pattern(out.back().vertices, 0);
  } else if (name == "overlap-pair") {
    const auto side = static_cast<Index>(std::max(2.0, std::round(std::sqrt(static_cast<double>(points)))));
    auto [s, t] = overlapping_squares(side, std::max<Index>(2, side / 4), 6.0, 2.0, 0.0);
    out.push_back(std::move(s));
    out.push_back(std::move(t));
  } else {
    throw ValidationError("unknown synthetic shape '" + name + "' (sphere, ellipsoid, square, holed-square, overlap-pair)");
  }
  if (noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, noise);
    for (auto& m : out) {
      for (Index k = 0; k < m.signal.size(); ++k) m.signal(k) += normal(rng);
    }
  }
  return out;
}

}  // namespace fshapes
