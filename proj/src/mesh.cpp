#include "fshapes/mesh.hpp"

#include "fshapes/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace fshapes {

namespace {

Eigen::Vector3d row3(const Points& x, Index k) { return {x(k, 0), x(k, 1), x(k, 2)}; }

void check_dims(int d, int n) {
  if (n != 2 && n != 3) throw ValidationError("ambient dimension must be 2 or 3, got " + std::to_string(n));
  if (d != 1 && d != 2) throw ValidationError("cell dimension must be 1 or 2, got " + std::to_string(d));
  if (d >= n) throw ValidationError("cell dimension must be smaller than ambient dimension");
}

}  // namespace

void validate(const FShapeMesh& mesh) {
  const Index P = mesh.num_vertices();
  check_dims(mesh.cell_dim(), mesh.ambient_dim());
  if (mesh.signal.size() != P) {
    throw ValidationError("signal has " + std::to_string(mesh.signal.size()) + " values for " +
                          std::to_string(P) + " vertices");
  }
  if (!mesh.vertices.allFinite()) throw ValidationError("non-finite vertex coordinate");
  if (!mesh.signal.allFinite()) throw ValidationError("non-finite signal value");
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (Index a = 0; a < mesh.cells.cols(); ++a) {
      const int k = mesh.cells(c, a);
      if (k < 0 || k >= P) {
        throw ValidationError("cell " + std::to_string(c) + " references vertex " + std::to_string(k) +
                              " outside [0, " + std::to_string(P) + ")");
      }
      for (Index b = 0; b < a; ++b) {
        if (mesh.cells(c, b) == k) throw ValidationError("cell " + std::to_string(c) + " repeats vertex " + std::to_string(k));
      }
    }
  }
}

double degenerate_tolerance(const Points& vertices, int cell_dim) {
  double extent = 0.0;
  if (vertices.rows() > 0) extent = (vertices.colwise().maxCoeff() - vertices.colwise().minCoeff()).maxCoeff();
  if (!(extent > 0.0)) extent = 1.0;
  return 1e-12 * std::pow(extent, cell_dim);
}

Eigen::VectorXd cell_volumes(const Points& x, const Cells& cells) {
  const Index T = cells.rows();
  Eigen::VectorXd vol(T);
  if (cells.cols() == 3) {
    for (Index c = 0; c < T; ++c) {
      const Eigen::Vector3d a = row3(x, cells(c, 0));
      vol(c) = 0.5 * (row3(x, cells(c, 1)) - a).cross(row3(x, cells(c, 2)) - a).norm();
    }
  } else {
    for (Index c = 0; c < T; ++c) vol(c) = (x.row(cells(c, 1)) - x.row(cells(c, 0))).norm();
  }
  return vol;
}

std::vector<Index> degenerate_cells(const FShapeMesh& mesh) {
  const double tol = degenerate_tolerance(mesh.vertices, mesh.cell_dim());
  const Eigen::VectorXd vol = cell_volumes(mesh.vertices, mesh.cells);
  std::vector<Index> out;
  for (Index c = 0; c < vol.size(); ++c) {
    if (vol(c) <= tol) out.push_back(c);
  }
  return out;
}

DiracSet to_diracs(const FShapeMesh& mesh) { return to_diracs(mesh.vertices, mesh.signal, mesh.cells); }

DiracSet to_diracs(const Points& x, const Signal& f, const Cells& cells) {
  const Index T = cells.rows();
  const int n = static_cast<int>(x.cols());
  const int d = static_cast<int>(cells.cols()) - 1;
  const double tol = degenerate_tolerance(x, d);

  DiracSet out;
  out.cell_dim = d;
  out.centers.resize(T, n);
  out.directions.resize(T, n);
  out.mean_signals.resize(T);
  out.weights.resize(T);
  out.degenerate.assign(static_cast<std::size_t>(T), false);

  for (Index c = 0; c < T; ++c) {
    Eigen::RowVectorXd dir(n);
    double weight = 0.0;
    double volume = 0.0;
    if (d == 2) {
      const Eigen::Vector3d a = row3(x, cells(c, 0));
      const Eigen::Vector3d N = (row3(x, cells(c, 1)) - a).cross(row3(x, cells(c, 2)) - a);
      weight = N.norm();
      volume = 0.5 * weight;
      dir = N.transpose();
      out.centers.row(c) = (x.row(cells(c, 0)) + x.row(cells(c, 1)) + x.row(cells(c, 2))) / 3.0;
      out.mean_signals(c) = (f(cells(c, 0)) + f(cells(c, 1)) + f(cells(c, 2))) / 3.0;
    } else {
      dir = x.row(cells(c, 1)) - x.row(cells(c, 0));
      weight = dir.norm();
      volume = weight;
      out.centers.row(c) = 0.5 * (x.row(cells(c, 0)) + x.row(cells(c, 1)));
      out.mean_signals(c) = 0.5 * (f(cells(c, 0)) + f(cells(c, 1)));
    }
    if (volume <= tol) {
      out.degenerate[static_cast<std::size_t>(c)] = true;
      out.weights(c) = 0.0;
      out.directions.row(c).setZero();
      out.directions(c, 0) = 1.0;
    } else {
      out.weights(c) = weight;
      out.directions.row(c) = dir / weight;
    }
  }
  return out;
}

MassMatrix mass_matrix(const FShapeMesh& mesh) { return mass_matrix(mesh.vertices, mesh.cells); }

MassMatrix mass_matrix(const Points& x, const Cells& cells) {
  const Eigen::VectorXd vol = cell_volumes(x, cells);
  const double share = 1.0 / static_cast<double>(cells.cols());
  MassMatrix m;
  m.weights = Eigen::VectorXd::Zero(x.rows());
  for (Index c = 0; c < cells.rows(); ++c) {
    for (Index a = 0; a < cells.cols(); ++a) m.weights(cells(c, a)) += share * vol(c);
  }
  return m;
}

double l2_inner(const MassMatrix& mass, const Signal& u, const Signal& v) {
  if (u.size() != mass.weights.size() || v.size() != mass.weights.size()) {
    throw ValidationError("l2_inner: vector length does not match vertex count");
  }
  return (mass.weights.array() * u.array() * v.array()).sum();
}

double l2_inner(const FShapeMesh& mesh, const Signal& u, const Signal& v) {
  return l2_inner(mass_matrix(mesh), u, v);
}

Points grad_mass_weights(const Points& x, const Cells& cells, const Eigen::VectorXd& coeffs) {
  const int n = static_cast<int>(x.cols());
  const int d = static_cast<int>(cells.cols()) - 1;
  const double share = 1.0 / static_cast<double>(d + 1);
  const double tol = degenerate_tolerance(x, d);
  Points grad = Points::Zero(x.rows(), n);

  for (Index c = 0; c < cells.rows(); ++c) {
    double alpha = 0.0;
    for (Index a = 0; a <= d; ++a) alpha += coeffs(cells(c, a));
    alpha *= share;
    if (alpha == 0.0) continue;
    if (d == 2) {
      const Eigen::Vector3d x1 = row3(x, cells(c, 0));
      const Eigen::Vector3d u = row3(x, cells(c, 1)) - x1;
      const Eigen::Vector3d v = row3(x, cells(c, 2)) - x1;
      const Eigen::Vector3d N = u.cross(v);
      const double norm = N.norm();
      if (0.5 * norm <= tol) continue;
      // d(|N|/2)/dN
      const Eigen::Vector3d g = alpha * 0.5 * N / norm;
      const Eigen::Vector3d gu = v.cross(g);
      const Eigen::Vector3d gv = g.cross(u);
      grad.row(cells(c, 0)) -= (gu + gv).transpose();
      grad.row(cells(c, 1)) += gu.transpose();
      grad.row(cells(c, 2)) += gv.transpose();
    } else {
      const Eigen::RowVectorXd e = x.row(cells(c, 1)) - x.row(cells(c, 0));
      const double len = e.norm();
      if (len <= tol) continue;
      grad.row(cells(c, 1)) += alpha * e / len;
      grad.row(cells(c, 0)) -= alpha * e / len;
    }
  }
  return grad;
}

std::vector<Index> boundary_vertices(const FShapeMesh& mesh) {
  const Index P = mesh.num_vertices();
  std::vector<bool> on_boundary(static_cast<std::size_t>(P), false);
  if (mesh.cell_dim() == 1) {
    std::vector<int> incidence(static_cast<std::size_t>(P), 0);
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      ++incidence[static_cast<std::size_t>(mesh.cells(c, 0))];
      ++incidence[static_cast<std::size_t>(mesh.cells(c, 1))];
    }
    for (Index k = 0; k < P; ++k) on_boundary[static_cast<std::size_t>(k)] = incidence[static_cast<std::size_t>(k)] == 1;
  } else {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(3 * mesh.num_cells()));
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      for (int a = 0; a < 3; ++a) {
        const int i = mesh.cells(c, a);
        const int j = mesh.cells(c, (a + 1) % 3);
        edges.emplace_back(std::min(i, j), std::max(i, j));
      }
    }
    std::sort(edges.begin(), edges.end());
    for (std::size_t e = 0; e < edges.size();) {
      std::size_t run = e + 1;
      while (run < edges.size() && edges[run] == edges[e]) ++run;
      if (run - e == 1) {
        on_boundary[static_cast<std::size_t>(edges[e].first)] = true;
        on_boundary[static_cast<std::size_t>(edges[e].second)] = true;
      }
      e = run;
    }
  }
  std::vector<Index> out;
  for (Index k = 0; k < P; ++k) {
    if (on_boundary[static_cast<std::size_t>(k)]) out.push_back(k);
  }
  return out;
}

}  // namespace fshapes
