#include "gqa/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gqa/program.hpp"

namespace gqa {

using nlohmann::json;

std::string_view to_string(SceneGraphErrorKind k) {
    switch (k) {
        case SceneGraphErrorKind::IoError: return "IoError";
        case SceneGraphErrorKind::JsonError: return "JsonError";
        case SceneGraphErrorKind::DanglingRelation: return "DanglingRelation";
        case SceneGraphErrorKind::BadBBox: return "BadBBox";
    }
    return "?";
}

SceneGraphError::SceneGraphError(SceneGraphErrorKind kind, std::string image_id, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + (image_id.empty() ? "" : " [image " + image_id + "]") +
                         ": " + what),
      kind_(kind),
      image_id_(std::move(image_id)) {}

namespace {

void insert_sorted(ObjectSet& set, const std::string& id) {
    auto it = std::lower_bound(set.begin(), set.end(), id);
    if (it == set.end() || *it != id) set.insert(it, id);
}

bool clamp_into(double& v, double hi) {
    double c = std::clamp(v, 0.0, hi);
    bool changed = c != v;
    v = c;
    return changed;
}

}  // namespace

SceneGraph SceneGraph::build(std::string image_id, double width, double height, std::vector<SGObject> objects,
                             std::vector<SGRelation> relations, std::vector<std::string>* warnings) {
    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back("image " + image_id + ": " + msg);
    };
    if (!std::isfinite(width) || !std::isfinite(height) || width <= 0 || height <= 0) {
        throw SceneGraphError(SceneGraphErrorKind::BadBBox, image_id, "image extent must be positive");
    }

    SceneGraph g;
    g.image_id_ = image_id;
    g.width_ = width;
    g.height_ = height;

    for (auto& obj : objects) {
        obj.name = normalize_text(obj.name);
        if (obj.name.empty()) {
            throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, "object " + obj.id + " has no name");
        }
        std::set<std::string> attrs;
        for (const auto& a : obj.attributes) {
            auto n = normalize_text(a);
            if (!n.empty()) attrs.insert(std::move(n));
        }
        obj.attributes = std::move(attrs);

        auto& b = obj.bbox;
        if (!std::isfinite(b.x1) || !std::isfinite(b.y1) || !std::isfinite(b.x2) || !std::isfinite(b.y2) ||
            b.x2 < b.x1 || b.y2 < b.y1) {
            throw SceneGraphError(SceneGraphErrorKind::BadBBox, image_id, "object " + obj.id + " has an invalid box");
        }
        bool clamped = clamp_into(b.x1, width) | clamp_into(b.x2, width) | clamp_into(b.y1, height) |
                       clamp_into(b.y2, height);
        if (clamped) warn("object " + obj.id + " box clamped to image bounds");

        std::string id = obj.id;
        if (!g.objects_.emplace(id, std::move(obj)).second) {
            throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, "duplicate object id " + id);
        }
    }

    std::stable_sort(relations.begin(), relations.end(),
                     [](const SGRelation& a, const SGRelation& b) { return a.subject < b.subject; });
    for (auto& rel : relations) {
        rel.predicate = normalize_text(rel.predicate);
        for (const auto* end : {&rel.subject, &rel.object}) {
            if (!g.objects_.count(*end)) {
                throw SceneGraphError(SceneGraphErrorKind::DanglingRelation, image_id,
                                      "relation " + rel.subject + " -" + rel.predicate + "-> " + rel.object +
                                          " references missing object " + *end);
            }
        }
        if (rel.subject == rel.object) {
            warn("dropping self relation on " + rel.subject);
            continue;
        }
        g.relations_.push_back(std::move(rel));
    }

    for (const auto& [id, obj] : g.objects_) {
        insert_sorted(g.name_index_[obj.name], id);
        for (const auto& a : obj.attributes) insert_sorted(g.attr_index_[a], id);
    }
    for (const auto& rel : g.relations_) {
        insert_sorted(g.forward_[{rel.subject, rel.predicate}], rel.object);
        insert_sorted(g.inverse_[{rel.object, rel.predicate}], rel.subject);
    }
    return g;
}

const SGObject* SceneGraph::find(std::string_view id) const {
    auto it = objects_.find(std::string(id));
    return it == objects_.end() ? nullptr : &it->second;
}

const SGObject& SceneGraph::at(std::string_view id) const {
    const auto* o = find(id);
    if (!o) throw std::out_of_range("no object " + std::string(id) + " in image " + image_id_);
    return *o;
}

ObjectSet SceneGraph::objects_by_name(std::string_view name) const {
    auto it = name_index_.find(std::string(name));
    return it == name_index_.end() ? ObjectSet{} : it->second;
}

ObjectSet SceneGraph::objects_with_attribute(std::string_view attr) const {
    auto it = attr_index_.find(std::string(attr));
    return it == attr_index_.end() ? ObjectSet{} : it->second;
}

ObjectSet SceneGraph::related(const ObjectSet& source_ids, std::string_view predicate, Direction dir) const {
    const auto& index = dir == Direction::Forward ? forward_ : inverse_;
    ObjectSet out;
    std::pair<std::string, std::string> key{std::string(), std::string(predicate)};
    for (const auto& src : source_ids) {
        key.first = src;
        auto it = index.find(key);
        if (it == index.end()) continue;
        ObjectSet merged;
        std::set_union(out.begin(), out.end(), it->second.begin(), it->second.end(), std::back_inserter(merged));
        out = std::move(merged);
    }
    return out;
}

namespace {

double number_field(const json& obj, const char* key, const std::string& image_id, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) {
        throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id,
                              where + ": missing numeric field '" + key + "'");
    }
    return it->get<double>();
}

SceneGraph parse_one(const std::string& image_id, const json& body, std::vector<std::string>* warnings) {
    if (!body.is_object()) throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, "graph is not an object");
    double width = number_field(body, "width", image_id, "graph");
    double height = number_field(body, "height", image_id, "graph");

    std::vector<SGObject> objects;
    std::vector<SGRelation> relations;
    auto objs = body.find("objects");
    if (objs != body.end()) {
        if (!objs->is_object()) {
            throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, "'objects' is not an object");
        }
        for (const auto& [oid, o] : objs->items()) {
            if (!o.is_object()) {
                throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, "object " + oid + " is not an object");
            }
            SGObject obj;
            obj.id = oid;
            auto name = o.find("name");
            if (name == o.end() || !name->is_string()) {
                throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, "object " + oid + " has no name");
            }
            obj.name = name->get<std::string>();
            std::string where = "object " + oid;
            double x = number_field(o, "x", image_id, where);
            double y = number_field(o, "y", image_id, where);
            double w = number_field(o, "w", image_id, where);
            double h = number_field(o, "h", image_id, where);
            obj.bbox = {x, y, x + w, y + h};
            if (auto attrs = o.find("attributes"); attrs != o.end()) {
                if (!attrs->is_array()) {
                    throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, where + ": bad attributes");
                }
                for (const auto& a : *attrs) {
                    if (!a.is_string()) {
                        throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, where + ": bad attribute");
                    }
                    obj.attributes.insert(a.get<std::string>());
                }
            }
            if (auto rels = o.find("relations"); rels != o.end()) {
                if (!rels->is_array()) {
                    throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, where + ": bad relations");
                }
                for (const auto& r : *rels) {
                    auto rn = r.find("name");
                    auto ro = r.find("object");
                    if (!r.is_object() || rn == r.end() || ro == r.end() || !rn->is_string() || !ro->is_string()) {
                        throw SceneGraphError(SceneGraphErrorKind::JsonError, image_id, where + ": bad relation");
                    }
                    relations.push_back({oid, rn->get<std::string>(), ro->get<std::string>()});
                }
            }
            objects.push_back(std::move(obj));
        }
    }
    return SceneGraph::build(image_id, width, height, std::move(objects), std::move(relations), warnings);
}

}  // namespace

SceneGraphStore parse_scene_graphs(const json& doc, std::vector<std::string>* warnings) {
    if (!doc.is_object()) throw SceneGraphError(SceneGraphErrorKind::JsonError, "", "top level is not an object");
    SceneGraphStore store;
    for (const auto& [image_id, body] : doc.items()) store.emplace(image_id, parse_one(image_id, body, warnings));
    return store;
}

SceneGraphStore load_scene_graphs(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SceneGraphError(SceneGraphErrorKind::IoError, "", "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw SceneGraphError(SceneGraphErrorKind::JsonError, "", path.string() + ": " + e.what());
    }
    return parse_scene_graphs(doc, warnings);
}

json scene_graph_to_json(const SceneGraph& g) {
    json objects = json::object();
    for (const auto& [id, obj] : g.objects()) {
        json rels = json::array();
        for (const auto& rel : g.relations()) {
            if (rel.subject == id) rels.push_back({{"name", rel.predicate}, {"object", rel.object}});
        }
        objects[id] = {
            {"name", obj.name},
            {"x", obj.bbox.x1},
            {"y", obj.bbox.y1},
            {"w", obj.bbox.width()},
            {"h", obj.bbox.height()},
            {"attributes", obj.attributes},
            {"relations", std::move(rels)},
        };
    }
    return {{"width", g.width()}, {"height", g.height()}, {"objects", std::move(objects)}};
}

json scene_graphs_to_json(const SceneGraphStore& store) {
    json doc = json::object();
    for (const auto& [id, g] : store) doc[id] = scene_graph_to_json(g);
    return doc;
}

}  // namespace gqa
