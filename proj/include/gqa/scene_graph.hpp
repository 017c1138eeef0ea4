#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace gqa {

struct BBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    bool operator==(const BBox&) const = default;
};

struct SGObject {
    std::string id;
    std::string name;
    BBox bbox;
    std::set<std::string> attributes;

    bool has_attribute(std::string_view a) const { return attributes.find(std::string(a)) != attributes.end(); }
    bool operator==(const SGObject&) const = default;
};

struct SGRelation {
    std::string subject;
    std::string predicate;
    std::string object;

    bool operator==(const SGRelation&) const = default;
};

/// Object ids, sorted ascending and free of duplicates.
using ObjectSet = std::vector<std::string>;

enum class Direction { Forward, Inverse };

enum class SceneGraphErrorKind { IoError, JsonError, DanglingRelation, BadBBox };

std::string_view to_string(SceneGraphErrorKind k);

class SceneGraphError : public std::runtime_error {
public:
    SceneGraphError(SceneGraphErrorKind kind, std::string image_id, const std::string& what);
    SceneGraphErrorKind kind() const { return kind_; }
    const std::string& image_id() const { return image_id_; }

private:
    SceneGraphErrorKind kind_;
    std::string image_id_;
};

/// Immutable, indexed scene graph. Build through SceneGraph::build or the loaders.
class SceneGraph {
public:
    SceneGraph() = default;

    /// Validates relation endpoints and bboxes against the image extent, then
    /// builds the name/attribute/relation indices. Out-of-range boxes are
    /// clamped (a note is appended to `warnings`); negative or non-finite
    /// extents throw BadBBox. Self relations are dropped with a note.
    static SceneGraph build(std::string image_id, double width, double height, std::vector<SGObject> objects,
                            std::vector<SGRelation> relations, std::vector<std::string>* warnings = nullptr);

    const std::string& image_id() const { return image_id_; }
    double width() const { return width_; }
    double height() const { return height_; }
    const std::map<std::string, SGObject>& objects() const { return objects_; }
    const std::vector<SGRelation>& relations() const { return relations_; }
    const std::map<std::string, ObjectSet>& name_index() const { return name_index_; }
    const std::map<std::string, ObjectSet>& attr_index() const { return attr_index_; }

    /// nullptr when absent.
    const SGObject* find(std::string_view id) const;
    const SGObject& at(std::string_view id) const;

    ObjectSet objects_by_name(std::string_view name) const;
    ObjectSet objects_with_attribute(std::string_view attr) const;
    ObjectSet related(const ObjectSet& source_ids, std::string_view predicate, Direction dir) const;

    bool operator==(const SceneGraph& o) const {
        return image_id_ == o.image_id_ && width_ == o.width_ && height_ == o.height_ && objects_ == o.objects_ &&
               relations_ == o.relations_;
    }

private:
    std::string image_id_;
    double width_ = 0;
    double height_ = 0;
    std::map<std::string, SGObject> objects_;
    std::vector<SGRelation> relations_;
    std::map<std::string, ObjectSet> name_index_;
    std::map<std::string, ObjectSet> attr_index_;
    // (endpoint id, predicate) -> other endpoint ids
    std::map<std::pair<std::string, std::string>, ObjectSet, std::less<>> forward_;
    std::map<std::pair<std::string, std::string>, ObjectSet, std::less<>> inverse_;
};

using SceneGraphStore = std::map<std::string, SceneGraph>;

/// Parses the GQA layout: {imageId: {width, height, objects: {objId: {name, x, y, w, h,
/// attributes, relations: [{name, object}]}}}}. Boxes convert to corner form.
SceneGraphStore parse_scene_graphs(const nlohmann::json& doc, std::vector<std::string>* warnings = nullptr);
SceneGraphStore load_scene_graphs(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Inverse of parse_scene_graphs for one graph (corner boxes back to x/y/w/h).
nlohmann::json scene_graph_to_json(const SceneGraph& g);
nlohmann::json scene_graphs_to_json(const SceneGraphStore& store);

}  // namespace gqa
