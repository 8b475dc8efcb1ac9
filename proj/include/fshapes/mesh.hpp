#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace fshapes {

using Index = Eigen::Index;

/// One point per row (P x n).
using Points = Eigen::MatrixXd;
/// One scalar per vertex.
using Signal = Eigen::VectorXd;
/// One cell per row, d+1 zero-based vertex indices.
using Cells = Eigen::MatrixXi;

/**
 * Discrete functional shape: a polyhedral mesh (segments or triangles)
 * with one scalar signal value per vertex.
 *
 * The ambient dimension n is the number of columns of `vertices`, the cell
 * dimension d is `cells.cols() - 1`. Supported pairs are (d, n) in
 * {(1, 2), (1, 3), (2, 3)}.
 */
struct FShapeMesh {
  Points vertices;
  Signal signal;
  Cells cells;

  Index num_vertices() const { return vertices.rows(); }
  Index num_cells() const { return cells.rows(); }
  int ambient_dim() const { return static_cast<int>(vertices.cols()); }
  int cell_dim() const { return static_cast<int>(cells.cols()) - 1; }
};

/// Throws ValidationError when the mesh breaks a structural invariant.
/// Degenerate (zero-measure) cells are not an error; see degenerate_cells().
void validate(const FShapeMesh& mesh);

/// Absolute d-volume below which a cell counts as degenerate. Scales with the
/// bounding box so the test is unit-free.
double degenerate_tolerance(const Points& vertices, int cell_dim);

/// Indices of cells whose d-volume is below degenerate_tolerance().
std::vector<Index> degenerate_cells(const FShapeMesh& mesh);

/// Weighted Diracs approximating the functional varifold of a mesh, one per cell.
struct DiracSet {
  Points centers;
  Points directions;  // unit normal (d=2) or unit tangent (d=1)
  Eigen::VectorXd mean_signals;
  Eigen::VectorXd weights;
  std::vector<bool> degenerate;
  int cell_dim = 0;

  Index size() const { return centers.rows(); }
  int ambient_dim() const { return static_cast<int>(centers.cols()); }
  double total_mass() const { return weights.sum(); }
};

/**
 * Triangles: center = vertex mean, direction = normalized cross product
 * (x2-x1)^(x3-x1), weight = norm of that cross product (twice the area).
 * Segments: center = midpoint, direction = normalized difference, weight =
 * length. Mean signal is the vertex average in both cases.
 *
 * Degenerate cells get weight 0, an arbitrary unit direction and a flag.
 */
DiracSet to_diracs(const FShapeMesh& mesh);
DiracSet to_diracs(const Points& vertices, const Signal& signal, const Cells& cells);

/// Lumped (diagonal) L2 mass matrix: each cell spreads its true d-volume
/// equally over its d+1 vertices.
struct MassMatrix {
  Eigen::VectorXd weights;

  double total() const { return weights.sum(); }
};

MassMatrix mass_matrix(const FShapeMesh& mesh);
MassMatrix mass_matrix(const Points& vertices, const Cells& cells);

/// True d-volume of each cell (triangle area, segment length).
Eigen::VectorXd cell_volumes(const Points& vertices, const Cells& cells);

/// (D(x) u | v).
double l2_inner(const FShapeMesh& mesh, const Signal& u, const Signal& v);
double l2_inner(const MassMatrix& mass, const Signal& u, const Signal& v);

/// Gradient with respect to the vertex positions of sum_k coeffs_k w_k(x),
/// where w_k are the lumped mass weights. Degenerate cells contribute zero.
Points grad_mass_weights(const Points& vertices, const Cells& cells, const Eigen::VectorXd& coeffs);

/// Vertices incident to an edge (d=2) or cell (d=1) that appears exactly once.
std::vector<Index> boundary_vertices(const FShapeMesh& mesh);

enum class MeshFormat { NativeAscii, OffWithSignal };

/// Picks the format from the extension: ".off" is OFF-with-signal, anything
/// else is the native format.
MeshFormat format_for_path(const std::filesystem::path& path);

/// Loads and validates a mesh. Degenerate cells are reported through
/// `degenerate` when non-null; they are never dropped.
FShapeMesh load_fshape(const std::filesystem::path& path, MeshFormat format,
                       std::vector<Index>* degenerate = nullptr);
FShapeMesh load_fshape(const std::filesystem::path& path);

/// Values are written with 17 significant digits so load(save(m)) == m.
void save_fshape(const FShapeMesh& mesh, const std::filesystem::path& path, MeshFormat format);
void save_fshape(const FShapeMesh& mesh, const std::filesystem::path& path);

/// Sidecar matrices (momenta, residuals): one row per line, whitespace separated.
void save_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

}  // namespace fshapes
