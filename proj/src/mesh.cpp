#include "afem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "afem/errors.hpp"

namespace afem {

namespace {

std::uint64_t edge_key(VertexId a, VertexId b)
{
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
}

double signed_area(const Point& a, const Point& b, const Point& c)
{
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

// Vertices of the edge opposite local vertex k, counter-clockwise.
std::array<VertexId, 2> opposite_edge(const Triangle& t, int k)
{
    return {t.v[static_cast<std::size_t>((k + 1) % 3)], t.v[static_cast<std::size_t>((k + 2) % 3)]};
}

constexpr int kGenerationSafetyCap = 64;

} // namespace

// ---------------------------------------------------------------------------
// Forest

Forest::Forest(std::vector<Vertex> vertices, const std::vector<std::array<VertexId, 3>>& roots,
               Labeling labeling)
    : vertices_(std::move(vertices))
{
    if (roots.empty())
        throw InvalidArgument("Forest: empty initial partition");
    for (const auto& vx : vertices_)
        if (!std::isfinite(vx.x) || !std::isfinite(vx.y))
            throw InvalidArgument("Forest: non-finite vertex coordinate");

    std::unordered_map<std::uint64_t, int> edge_count;
    elements_.reserve(roots.size());
    for (const auto& r : roots) {
        for (VertexId id : r)
            if (id < 0 || static_cast<std::size_t>(id) >= vertices_.size())
                throw InvalidArgument("Forest: vertex index out of range");

        std::array<VertexId, 3> v = r;
        if (labeling == Labeling::longest_edge) {
            int peak = 0;
            double best = -1.0;
            for (int k = 0; k < 3; ++k) {
                const auto e = std::array<VertexId, 2>{v[static_cast<std::size_t>((k + 1) % 3)],
                                                       v[static_cast<std::size_t>((k + 2) % 3)]};
                const double len = (vertices_[static_cast<std::size_t>(e[0])].point() -
                                    vertices_[static_cast<std::size_t>(e[1])].point())
                                       .norm();
                const bool tie = best > 0.0 && std::abs(len - best) <= 1e-12 * best;
                if (len > best && !tie) {
                    best = len;
                    peak = k;
                } else if (tie && v[static_cast<std::size_t>(k)] < v[static_cast<std::size_t>(peak)]) {
                    peak = k;
                }
            }
            v = {v[static_cast<std::size_t>((peak + 1) % 3)], v[static_cast<std::size_t>((peak + 2) % 3)],
                 v[static_cast<std::size_t>(peak)]};
        }
        const double a = signed_area(vertices_[static_cast<std::size_t>(v[0])].point(),
                                     vertices_[static_cast<std::size_t>(v[1])].point(),
                                     vertices_[static_cast<std::size_t>(v[2])].point());
        if (a == 0.0)
            throw InvalidArgument("Forest: degenerate initial triangle");
        if (a < 0.0)
            std::swap(v[0], v[1]);

        Triangle t;
        t.v = v;
        t.root = static_cast<ElemId>(elements_.size());
        elements_.push_back(t);
        domain_area_ += std::abs(a);
        for (int k = 0; k < 3; ++k) {
            const auto e = opposite_edge(t, k);
            ++edge_count[edge_key(e[0], e[1])];
        }
    }
    for (auto& t : elements_) {
        for (int k = 0; k < 3; ++k) {
            const auto e = opposite_edge(t, k);
            const int c = edge_count[edge_key(e[0], e[1])];
            if (c > 2)
                throw InvalidArgument("Forest: edge shared by more than two triangles");
            t.on_boundary[static_cast<std::size_t>(k)] = (c == 1);
        }
    }
    num_roots_ = elements_.size();
}

std::array<Point, 3> Forest::corners(ElemId id) const
{
    const auto& t = element(id);
    return {vertex(t.v[0]).point(), vertex(t.v[1]).point(), vertex(t.v[2]).point()};
}

double Forest::area(ElemId id) const
{
    const auto c = corners(id);
    return signed_area(c[0], c[1], c[2]);
}

double Forest::diameter(ElemId id) const
{
    const auto c = corners(id);
    return std::max({(c[0] - c[1]).norm(), (c[1] - c[2]).norm(), (c[2] - c[0]).norm()});
}

VertexId Forest::midpoint(VertexId a, VertexId b)
{
    const auto key = edge_key(a, b);
    if (auto it = midpoints_.find(key); it != midpoints_.end())
        return it->second;
    const Vertex& va = vertices_[static_cast<std::size_t>(a)];
    const Vertex& vb = vertices_[static_cast<std::size_t>(b)];
    const auto id = static_cast<VertexId>(vertices_.size());
    vertices_.push_back({0.5 * (va.x + vb.x), 0.5 * (va.y + vb.y)});
    midpoints_.emplace(key, id);
    return id;
}

std::optional<VertexId> Forest::find_midpoint(VertexId a, VertexId b) const
{
    if (auto it = midpoints_.find(edge_key(a, b)); it != midpoints_.end())
        return it->second;
    return std::nullopt;
}

std::array<ElemId, 2> Forest::bisect(ElemId id)
{
    if (id < 0 || static_cast<std::size_t>(id) >= elements_.size())
        throw InvalidArgument("bisect: element id out of range");
    if (elements_[static_cast<std::size_t>(id)].is_bisected())
        return elements_[static_cast<std::size_t>(id)].children;

    const Triangle parent = elements_[static_cast<std::size_t>(id)];
    const VertexId m = midpoint(parent.v[0], parent.v[1]);

    // The midpoint becomes the peak of both children; each child's
    // refinement edge is the old parent edge opposite the midpoint.
    Triangle a;
    a.v = {parent.v[2], parent.v[0], m};
    a.on_boundary = {parent.on_boundary[2], false, parent.on_boundary[1]};
    Triangle b;
    b.v = {parent.v[1], parent.v[2], m};
    b.on_boundary = {false, parent.on_boundary[2], parent.on_boundary[0]};
    for (Triangle* c : {&a, &b}) {
        c->parent = id;
        c->root = parent.root;
        c->generation = parent.generation + 1;
    }
    const auto ia = static_cast<ElemId>(elements_.size());
    elements_.push_back(a);
    elements_.push_back(b);
    elements_[static_cast<std::size_t>(id)].children = {ia, ia + 1};
    return {ia, ia + 1};
}

bool Forest::is_ancestor_or_self(ElemId ancestor, ElemId id) const
{
    while (id != kNoElem) {
        if (id == ancestor)
            return true;
        if (element(id).generation <= element(ancestor).generation)
            return false;
        id = element(id).parent;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Partition

Partition Partition::initial(std::shared_ptr<Forest> forest)
{
    std::vector<ElemId> roots(forest->num_roots());
    for (std::size_t i = 0; i < roots.size(); ++i)
        roots[i] = static_cast<ElemId>(i);
    return from_leaves(std::move(forest), std::move(roots));
}

Partition Partition::from_leaves(std::shared_ptr<Forest> forest, std::vector<ElemId> leaves)
{
    auto data = std::make_shared<Data>();
    std::sort(leaves.begin(), leaves.end());
    leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());
    data->leaves = std::move(leaves);

    const Forest& f = *forest;
    data->leaf_index.assign(f.num_elements(), -1);
    for (std::size_t i = 0; i < data->leaves.size(); ++i)
        data->leaf_index[static_cast<std::size_t>(data->leaves[i])] = static_cast<int>(i);

    for (ElemId id : data->leaves)
        for (VertexId v : f.element(id).v)
            data->vertices.push_back(v);
    std::sort(data->vertices.begin(), data->vertices.end());
    data->vertices.erase(std::unique(data->vertices.begin(), data->vertices.end()), data->vertices.end());
    data->vertex_index.reserve(data->vertices.size());
    for (std::size_t i = 0; i < data->vertices.size(); ++i)
        data->vertex_index.emplace(data->vertices[i], static_cast<int>(i));

    std::unordered_map<std::uint64_t, int> edge_of;
    edge_of.reserve(data->leaves.size() * 2);
    data->element_edges.resize(data->leaves.size());
    for (std::size_t i = 0; i < data->leaves.size(); ++i) {
        const ElemId id = data->leaves[i];
        const Triangle& t = f.element(id);
        for (int k = 0; k < 3; ++k) {
            const auto ev = opposite_edge(t, k);
            const auto key = edge_key(ev[0], ev[1]);
            auto [it, inserted] = edge_of.emplace(key, static_cast<int>(data->edges.size()));
            if (inserted) {
                MeshEdge e;
                e.v = ev;
                e.elems[0] = id;
                e.local[0] = k;
                e.boundary = t.on_boundary[static_cast<std::size_t>(k)];
                data->edges.push_back(e);
            } else {
                MeshEdge& e = data->edges[static_cast<std::size_t>(it->second)];
                if (e.elems[1] != kNoElem || e.boundary)
                    data->conforming = false;
                e.elems[1] = id;
                e.local[1] = k;
            }
            data->element_edges[i][static_cast<std::size_t>(k)] = it->second;
        }
    }
    for (const auto& e : data->edges)
        if (!e.interior() && !e.boundary)
            data->conforming = false;

    return Partition(std::move(forest), std::move(data));
}

bool Partition::contains(ElemId id) const
{
    return index_of(id) >= 0;
}

int Partition::index_of(ElemId id) const
{
    if (id < 0 || static_cast<std::size_t>(id) >= data_->leaf_index.size())
        return -1;
    return data_->leaf_index[static_cast<std::size_t>(id)];
}

int Partition::local_vertex(VertexId id) const
{
    auto it = data_->vertex_index.find(id);
    return it == data_->vertex_index.end() ? -1 : it->second;
}

bool Partition::same_leaves(const Partition& other) const
{
    return forest_ == other.forest_ && data_->leaves == other.data_->leaves;
}

// ---------------------------------------------------------------------------
// Refinement with completion

namespace {

// Mutable leaf set with an edge -> owner table, used while bisecting and
// closing hanging vertices.
class Closure {
public:
    Closure(Forest& forest, std::span<const ElemId> leaves) : forest_(forest)
    {
        for (ElemId id : leaves)
            add_leaf(id);
    }

    bool is_leaf(ElemId id) const
    {
        return static_cast<std::size_t>(id) < leaf_.size() && leaf_[static_cast<std::size_t>(id)];
    }

    // An element needs bisection when one of its edges carries a vertex of
    // the current partition in its interior.
    bool has_hanging_vertex(ElemId id) const
    {
        const Triangle& t = forest_.element(id);
        for (int k = 0; k < 3; ++k) {
            if (t.on_boundary[static_cast<std::size_t>(k)])
                continue;
            const auto e = opposite_edge(t, k);
            const auto m = forest_.find_midpoint(e[0], e[1]);
            if (m && (owners_.count(edge_key(e[0], *m)) || owners_.count(edge_key(*m, e[1]))))
                return true;
        }
        return false;
    }

    void split(ElemId id)
    {
        const Triangle t = forest_.element(id);
        if (t.generation >= kGenerationSafetyCap)
            throw std::logic_error("refine: completion exceeded the generation safety cap");
        remove_leaf(id);
        const auto children = forest_.bisect(id);
        for (ElemId c : children)
            add_leaf(c);

        const auto key = edge_key(t.v[0], t.v[1]);
        if (auto it = owners_.find(key); it != owners_.end())
            for (ElemId n : it->second)
                if (n != kNoElem)
                    queue_.push_back(n);
        for (ElemId c : children)
            if (has_hanging_vertex(c))
                queue_.push_back(c);
    }

    void push(ElemId id) { queue_.push_back(id); }

    void complete()
    {
        while (!queue_.empty()) {
            const ElemId id = queue_.front();
            queue_.pop_front();
            if (is_leaf(id) && has_hanging_vertex(id))
                split(id);
        }
    }

    std::vector<ElemId> leaves() const
    {
        std::vector<ElemId> out;
        for (std::size_t i = 0; i < leaf_.size(); ++i)
            if (leaf_[i])
                out.push_back(static_cast<ElemId>(i));
        return out;
    }

private:
    void add_leaf(ElemId id)
    {
        if (static_cast<std::size_t>(id) >= leaf_.size())
            leaf_.resize(static_cast<std::size_t>(id) + 1, 0);
        leaf_[static_cast<std::size_t>(id)] = 1;
        const Triangle& t = forest_.element(id);
        for (int k = 0; k < 3; ++k) {
            const auto e = opposite_edge(t, k);
            auto& slot = owners_.try_emplace(edge_key(e[0], e[1]), std::array<ElemId, 2>{kNoElem, kNoElem})
                             .first->second;
            (slot[0] == kNoElem ? slot[0] : slot[1]) = id;
        }
    }

    void remove_leaf(ElemId id)
    {
        leaf_[static_cast<std::size_t>(id)] = 0;
        const Triangle& t = forest_.element(id);
        for (int k = 0; k < 3; ++k) {
            const auto e = opposite_edge(t, k);
            auto it = owners_.find(edge_key(e[0], e[1]));
            auto& slot = it->second;
            if (slot[0] == id)
                slot[0] = slot[1];
            slot[1] = kNoElem;
            if (slot[0] == kNoElem)
                owners_.erase(it);
        }
    }

    Forest& forest_;
    std::vector<char> leaf_;
    std::unordered_map<std::uint64_t, std::array<ElemId, 2>> owners_;
    std::deque<ElemId> queue_;
};

} // namespace

Partition bisect(const Partition& p, ElemId elem)
{
    if (!p.contains(elem))
        throw InvalidArgument("bisect: element " + std::to_string(elem) + " is not a leaf");
    const auto children = p.forest_ptr()->bisect(elem);
    std::vector<ElemId> leaves(p.leaves().begin(), p.leaves().end());
    std::erase(leaves, elem);
    leaves.push_back(children[0]);
    leaves.push_back(children[1]);
    return Partition::from_leaves(p.forest_ptr(), std::move(leaves));
}

Partition refine(const Partition& p, std::span<const ElemId> marked)
{
    std::vector<ElemId> r(marked.begin(), marked.end());
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    for (ElemId id : r)
        if (!p.contains(id))
            throw InvalidArgument("refine: marked element " + std::to_string(id) + " is not a leaf");
    if (r.empty())
        return p;

    Closure work(*p.forest_ptr(), p.leaves());
    for (ElemId id : r)
        work.split(id);
    work.complete();
    auto out = Partition::from_leaves(p.forest_ptr(), work.leaves());
    if (!out.is_conforming())
        throw std::logic_error("refine: completion produced a non-conforming partition");
    return out;
}

Partition refine_uniform(const Partition& p, int sweeps)
{
    Partition out = p;
    for (int s = 0; s < sweeps; ++s) {
        const std::vector<ElemId> all(out.leaves().begin(), out.leaves().end());
        out = refine(out, all);
    }
    return out;
}

Partition overlay(const Partition& p, const Partition& q)
{
    if (p.forest_ptr() != q.forest_ptr())
        throw InvalidArgument("overlay: partitions have differing roots");
    const Forest& f = p.forest();
    std::vector<char> in_union(f.num_elements(), 0);
    auto mark_path = [&](ElemId id) {
        while (id != kNoElem && !in_union[static_cast<std::size_t>(id)]) {
            in_union[static_cast<std::size_t>(id)] = 1;
            id = f.element(id).parent;
        }
    };
    for (ElemId id : p.leaves())
        mark_path(id);
    for (ElemId id : q.leaves())
        mark_path(id);

    std::vector<ElemId> leaves;
    for (std::size_t i = 0; i < in_union.size(); ++i) {
        if (!in_union[i])
            continue;
        const Triangle& t = f.element(static_cast<ElemId>(i));
        if (!t.is_bisected() || !in_union[static_cast<std::size_t>(t.children[0])])
            leaves.push_back(static_cast<ElemId>(i));
    }

    Closure work(*p.forest_ptr(), leaves);
    for (ElemId id : leaves)
        work.push(id);
    work.complete();
    auto out = Partition::from_leaves(p.forest_ptr(), work.leaves());
    if (!out.is_conforming())
        throw std::logic_error("overlay: result is not conforming");
    const std::size_t n0 = f.num_roots();
    if (out.size() + n0 > p.size() + q.size())
        throw std::logic_error("overlay: #(P+Q) <= #P + #Q - #P0 violated");
    return out;
}

bool is_refinement_of(const Partition& fine, const Partition& coarse)
{
    if (fine.forest_ptr() != coarse.forest_ptr())
        return false;
    const Forest& f = fine.forest();
    for (ElemId id : fine.leaves()) {
        ElemId a = id;
        while (a != kNoElem && !coarse.contains(a))
            a = f.element(a).parent;
        if (a == kNoElem)
            return false;
    }
    return true;
}

std::vector<ElemId> refined_elements(const Partition& before, const Partition& after)
{
    std::vector<ElemId> out;
    for (ElemId id : before.leaves())
        if (!after.contains(id))
            out.push_back(id);
    return out;
}

// ---------------------------------------------------------------------------
// Queries

namespace {

std::vector<std::vector<int>> vertex_to_leaves(const Partition& p)
{
    std::vector<std::vector<int>> out(p.vertices().size());
    for (std::size_t i = 0; i < p.size(); ++i)
        for (VertexId v : p.forest().element(p.leaf(i)).v)
            out[static_cast<std::size_t>(p.local_vertex(v))].push_back(static_cast<int>(i));
    return out;
}

} // namespace

MeshStats mesh_stats(const Partition& p)
{
    MeshStats s;
    s.leaf_count = p.size();
    s.min_generation = std::numeric_limits<int>::max();
    s.sigma_g = 1.0;
    const Forest& f = p.forest();
    std::vector<double> diam(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const ElemId id = p.leaf(i);
        diam[i] = f.diameter(id);
        s.sigma_s = std::max(s.sigma_s, diam[i] * diam[i] / f.area(id));
        s.min_generation = std::min(s.min_generation, f.element(id).generation);
        s.max_generation = std::max(s.max_generation, f.element(id).generation);
    }
    const auto v2l = vertex_to_leaves(p);
    for (const auto& around : v2l) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (int i : around) {
            lo = std::min(lo, diam[static_cast<std::size_t>(i)]);
            hi = std::max(hi, diam[static_cast<std::size_t>(i)]);
        }
        if (!around.empty())
            s.sigma_g = std::max(s.sigma_g, hi / lo);
    }
    std::vector<int> seen(p.size(), -1);
    for (std::size_t i = 0; i < p.size(); ++i) {
        std::size_t count = 0;
        for (VertexId v : f.element(p.leaf(i)).v)
            for (int j : v2l[static_cast<std::size_t>(p.local_vertex(v))])
                if (seen[static_cast<std::size_t>(j)] != static_cast<int>(i)) {
                    seen[static_cast<std::size_t>(j)] = static_cast<int>(i);
                    ++count;
                }
        s.max_star = std::max(s.max_star, count);
    }
    if (p.size() == 0)
        s.min_generation = 0;
    return s;
}

std::vector<ElemId> star(const Partition& p, ElemId elem)
{
    if (!p.contains(elem))
        throw InvalidArgument("star: element " + std::to_string(elem) + " is not a leaf");
    const auto& v = p.forest().element(elem).v;
    std::vector<ElemId> out;
    for (ElemId id : p.leaves()) {
        const auto& w = p.forest().element(id).v;
        const bool touches = std::any_of(w.begin(), w.end(), [&](VertexId x) {
            return x == v[0] || x == v[1] || x == v[2];
        });
        if (touches)
            out.push_back(id);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Built-in domains

Partition make_unit_square_two()
{
    std::vector<Vertex> v{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    auto f = std::make_shared<Forest>(std::move(v), std::vector<std::array<VertexId, 3>>{{0, 1, 2}, {0, 2, 3}});
    return Partition::initial(std::move(f));
}

Partition make_unit_square_cross()
{
    std::vector<Vertex> v{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
    auto f = std::make_shared<Forest>(
        std::move(v), std::vector<std::array<VertexId, 3>>{{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}});
    return Partition::initial(std::move(f));
}

Partition make_lshape()
{
    // Grid corners of the three unit squares, then one centre per square.
    std::vector<Vertex> v{{-1, -1}, {0, -1}, {-1, 0}, {0, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};
    std::vector<std::array<VertexId, 3>> tris;
    auto add_square = [&](VertexId ll, VertexId lr, VertexId ur, VertexId ul) {
        const auto c = static_cast<VertexId>(v.size());
        const Vertex& a = v[static_cast<std::size_t>(ll)];
        const Vertex& b = v[static_cast<std::size_t>(ur)];
        v.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
        tris.push_back({ll, lr, c});
        tris.push_back({lr, ur, c});
        tris.push_back({ur, ul, c});
        tris.push_back({ul, ll, c});
    };
    add_square(0, 1, 3, 2);
    add_square(2, 3, 6, 5);
    add_square(3, 4, 7, 6);
    auto f = std::make_shared<Forest>(std::move(v), tris);
    return Partition::initial(std::move(f));
}

} // namespace afem
