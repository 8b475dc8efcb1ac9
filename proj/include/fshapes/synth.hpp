#pragma once

#include "fshapes/mesh.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fshapes {

/// Subdivided icosahedron projected on a sphere. The subdivision level is
/// the smallest one with at least `min_points` vertices (10 * 4^L + 2).
FShapeMesh icosphere(Index min_points, double radius = 1.0);

/// Icosphere scaled along the coordinate axes.
FShapeMesh ellipsoid(Index min_points, const Eigen::Vector3d& semi_axes);

/// Regular triangulated square in the z = 0 plane, `per_side` vertices per
/// side, centered at `center`.
FShapeMesh flat_square(Index per_side, double side, const Eigen::Vector2d& center = Eigen::Vector2d::Zero());

/// [-1, 1]^2 square with a centered square hole of half-width ~`hole_half`
/// (snapped to the grid). About `approx_points` vertices.
FShapeMesh holed_square(Index approx_points, double hole_half = 0.3);

/// Source: large square of `source_per_side`^2 vertices and side
/// `source_side`; target: small square of side `target_side` at the center,
/// lifted by `lift` along z so the two share no vertex. Source signal 0,
/// target signal 1.
std::pair<FShapeMesh, FShapeMesh> overlapping_squares(Index source_per_side, Index target_per_side,
                                                      double source_side, double target_side, double lift = 0.0);

/// Smooth two-valued pattern tanh(sharpness * x_axis): about -1 on one half,
/// +1 on the other.
Signal half_pattern(const Points& x, int axis = 2, double sharpness = 4.0);

/// Named generators for the command line: sphere, ellipsoid, square,
/// holed-square (one mesh each) and overlap-pair (source, target). `seed`
/// drives a small signal noise (standard deviation `noise`).
std::vector<FShapeMesh> synth(const std::string& name, Index points, std::uint64_t seed, double noise = 0.0);

/// Random smooth perturbation of a mesh: rigid-free jitter of the vertices
/// by a few Gaussian bumps of amplitude `amplitude`.
FShapeMesh jitter(const FShapeMesh& mesh, double amplitude, std::uint64_t seed);

}  // namespace fshapes
