#include "afem/mesh_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "afem/errors.hpp"

namespace afem {

using nlohmann::json;

std::string mesh_to_json(const Partition& p)
{
    json j;
    j["vertices"] = json::array();
    for (VertexId v : p.vertices()) {
        const Vertex& x = p.forest().vertex(v);
        j["vertices"].push_back({x.x, x.y});
    }
    j["triangles"] = json::array();
    j["boundary_markers"] = json::array();
    for (ElemId id : p.leaves()) {
        const Triangle& t = p.forest().element(id);
        j["triangles"].push_back({p.local_vertex(t.v[0]), p.local_vertex(t.v[1]), p.local_vertex(t.v[2])});
        j["boundary_markers"].push_back(
            {int(t.on_boundary[0]), int(t.on_boundary[1]), int(t.on_boundary[2])});
    }
    return j.dump(1) + "\n";
}

void export_mesh(const Partition& p, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot open mesh export file: " + path);
    out << mesh_to_json(p);
}

Partition mesh_from_json(const std::string& text)
{
    std::vector<Vertex> vertices;
    std::vector<std::array<VertexId, 3>> triangles;
    std::vector<std::array<int, 3>> markers;
    bool has_markers = false;
    try {
        const json j = json::parse(text);
        for (const auto& v : j.at("vertices"))
            vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        for (const auto& t : j.at("triangles"))
            triangles.push_back({t.at(0).get<VertexId>(), t.at(1).get<VertexId>(), t.at(2).get<VertexId>()});
        has_markers = j.contains("boundary_markers");
        if (has_markers)
            for (const auto& b : j.at("boundary_markers"))
                markers.push_back({b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>()});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed mesh file: ") + e.what());
    }
    if (has_markers && markers.size() != triangles.size())
        throw ConfigError("malformed mesh file: boundary_markers length differs from triangles");

    std::shared_ptr<Forest> forest;
    try {
        forest = std::make_shared<Forest>(std::move(vertices), triangles, Labeling::as_given);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("invalid mesh: ") + e.what());
    }
    for (std::size_t i = 0; i < markers.size(); ++i) {
        const Triangle& t = forest->element(static_cast<ElemId>(i));
        // A clockwise input triangle is flipped, which swaps its first two edges.
        const bool flipped = t.v[0] != triangles[i][0];
        for (int k = 0; k < 3; ++k) {
            const int src = flipped && k < 2 ? 1 - k : k;
            if (bool(markers[i][static_cast<std::size_t>(src)]) != t.on_boundary[static_cast<std::size_t>(k)])
                throw ConfigError("mesh file: boundary_markers disagree with the triangle adjacency");
        }
    }
    return Partition::initial(std::move(forest));
}

Partition import_mesh(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open mesh file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return mesh_from_json(ss.str());
}

} // namespace afem
