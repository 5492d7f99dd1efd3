#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace afem {

using ElemId = std::int32_t;
using VertexId = std::int32_t;
inline constexpr ElemId kNoElem = -1;

using Point = Eigen::Vector2d;

struct Vertex {
    double x = 0.0;
    double y = 0.0;

    Point point() const { return {x, y}; }
};

/// A node of a bisection tree. The refinement edge is the edge opposite v[2]
/// (the "peak"); on_boundary[i] refers to the edge opposite v[i].
struct Triangle {
    std::array<VertexId, 3> v{};
    std::array<bool, 3> on_boundary{};
    ElemId parent = kNoElem;
    std::array<ElemId, 2> children{kNoElem, kNoElem};
    ElemId root = kNoElem;
    int generation = 0;

    bool is_bisected() const { return children[0] != kNoElem; }
};

enum class Labeling {
    longest_edge, ///< peak opposite the longest edge, ties by smallest opposite vertex index
    as_given,     ///< keep the input order: refinement edge opposite the third vertex
};

/// Append-only store of every triangle and vertex ever created from a fixed
/// initial partition. Bisecting an element twice returns the same children,
/// so partitions refined independently from the same roots share element ids
/// and can be compared and overlaid.
class Forest {
public:
    Forest(std::vector<Vertex> vertices, const std::vector<std::array<VertexId, 3>>& roots,
           Labeling labeling = Labeling::longest_edge);

    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_elements() const { return elements_.size(); }
    std::size_t num_roots() const { return num_roots_; }

    const Vertex& vertex(VertexId id) const { return vertices_[static_cast<std::size_t>(id)]; }
    const Triangle& element(ElemId id) const { return elements_[static_cast<std::size_t>(id)]; }

    std::array<Point, 3> corners(ElemId id) const;
    double area(ElemId id) const;
    double diameter(ElemId id) const;
    double domain_area() const { return domain_area_; }

    /// Children of `id`, created on first request.
    std::array<ElemId, 2> bisect(ElemId id);

    /// Midpoint vertex of edge (a, b) if some bisection already created it.
    std::optional<VertexId> find_midpoint(VertexId a, VertexId b) const;

    /// True if `ancestor` lies on the path from `id` to its root (inclusive).
    bool is_ancestor_or_self(ElemId ancestor, ElemId id) const;

private:
    VertexId midpoint(VertexId a, VertexId b);

    std::vector<Vertex> vertices_;
    std::vector<Triangle> elements_;
    std::unordered_map<std::uint64_t, VertexId> midpoints_;
    std::size_t num_roots_ = 0;
    double domain_area_ = 0.0;
};

/// Edge of a partition. `elems[1] == kNoElem` for boundary edges (and for
/// unmatched edges of a non-conforming partition). `local[k]` is the local
/// vertex index opposite the edge in elems[k].
struct MeshEdge {
    std::array<VertexId, 2> v{};
    std::array<ElemId, 2> elems{kNoElem, kNoElem};
    std::array<int, 2> local{-1, -1};
    bool boundary = false;

    bool interior() const { return elems[1] != kNoElem; }
};

/// Immutable snapshot: a set of leaves of a Forest plus derived topology.
/// Copies are cheap and share the snapshot data.
class Partition {
public:
    /// The roots of the forest (P0).
    static Partition initial(std::shared_ptr<Forest> forest);
    /// Build from an explicit leaf set; leaves are sorted on construction.
    static Partition from_leaves(std::shared_ptr<Forest> forest, std::vector<ElemId> leaves);

    const Forest& forest() const { return *forest_; }
    const std::shared_ptr<Forest>& forest_ptr() const { return forest_; }

    /// Active elements in ascending id order.
    std::span<const ElemId> leaves() const { return data_->leaves; }
    std::size_t size() const { return data_->leaves.size(); }
    ElemId leaf(std::size_t i) const { return data_->leaves[i]; }

    bool contains(ElemId id) const;
    /// Position of `id` in leaves(), or -1.
    int index_of(ElemId id) const;

    /// Vertices touched by leaves, ascending forest ids; local numbering is the
    /// position in this list.
    std::span<const VertexId> vertices() const { return data_->vertices; }
    int local_vertex(VertexId id) const;

    std::span<const MeshEdge> edges() const { return data_->edges; }
    /// Edge index opposite local vertex i of leaf `leaf_index`.
    const std::array<int, 3>& element_edges(std::size_t leaf_index) const
    {
        return data_->element_edges[leaf_index];
    }

    /// No hanging vertices: every non-boundary edge is shared by exactly two leaves.
    bool is_conforming() const { return data_->conforming; }

    std::array<Point, 3> corners(std::size_t leaf_index) const
    {
        return forest_->corners(data_->leaves[leaf_index]);
    }
    double area(std::size_t leaf_index) const { return forest_->area(data_->leaves[leaf_index]); }

    bool same_leaves(const Partition& other) const;

private:
    struct Data {
        std::vector<ElemId> leaves;
        std::vector<int> leaf_index;  // forest id -> position, -1 if not a leaf
        std::vector<VertexId> vertices;
        std::unordered_map<VertexId, int> vertex_index;
        std::vector<MeshEdge> edges;
        std::vector<std::array<int, 3>> element_edges;
        bool conforming = true;
    };

    Partition(std::shared_ptr<Forest> forest, std::shared_ptr<const Data> data)
        : forest_(std::move(forest)), data_(std::move(data))
    {
    }

    std::shared_ptr<Forest> forest_;
    std::shared_ptr<const Data> data_;
};

struct MeshStats {
    double sigma_s = 0.0; ///< max (diam)^2 / area over leaves
    double sigma_g = 0.0; ///< max diam ratio over leaves with touching closures
    int min_generation = 0;
    int max_generation = 0;
    std::size_t leaf_count = 0;
    std::size_t max_star = 0; ///< largest star(P, tau) over leaves
};

/// Single newest-vertex bisection without completion; the result may be
/// non-conforming. Throws InvalidArgument if `elem` is not a leaf.
Partition bisect(const Partition& p, ElemId elem);

/// Bisects every element of `marked` at least once, then completes to a
/// conforming partition. Throws InvalidArgument if a marked id is not a leaf.
Partition refine(const Partition& p, std::span<const ElemId> marked);

/// `sweeps` rounds of bisecting every leaf (two sweeps halve h).
Partition refine_uniform(const Partition& p, int sweeps = 1);

/// Smallest common conforming refinement. Throws InvalidArgument if the
/// partitions live on different forests.
Partition overlay(const Partition& p, const Partition& q);

/// True if every leaf of `fine` descends from a leaf of `coarse`.
bool is_refinement_of(const Partition& fine, const Partition& coarse);

MeshStats mesh_stats(const Partition& p);

/// Leaves whose closure meets the closure of `elem` (including `elem`).
std::vector<ElemId> star(const Partition& p, ElemId elem);

/// Leaves of `before` that are not leaves of `after` (the refined set).
std::vector<ElemId> refined_elements(const Partition& before, const Partition& after);

// Built-in initial partitions.
Partition make_unit_square_two();   ///< 2 triangles, diagonal (0,0)-(1,1)
Partition make_unit_square_cross(); ///< 4 triangles around the centre
Partition make_lshape();            ///< (-1,1)^2 minus [0,1)x(-1,0], 12 triangles

} // namespace afem
