#pragma once

#include <string>

#include "afem/mesh.hpp"

namespace afem {

// JSON layout:
//   { "vertices": [[x, y], ...],
//     "triangles": [[v0, v1, v2], ...],        refinement edge opposite v2
//     "boundary_markers": [[b0, b1, b2], ...]  1 if the edge opposite vi is on the boundary }
// Vertices are renumbered densely over the leaves of the partition.

std::string mesh_to_json(const Partition& p);
void export_mesh(const Partition& p, const std::string& path);

/// Reads a mesh written by export_mesh (or by hand) as a new initial
/// partition, keeping the stored refinement edges. Throws ConfigError on
/// malformed input.
Partition mesh_from_json(const std::string& text);
Partition import_mesh(const std::string& path);

} // namespace afem
