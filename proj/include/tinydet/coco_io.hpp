#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tinydet/errors.hpp"
#include "tinydet/eval.hpp"

namespace tinydet {

namespace detail {

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw parse_error(path + ": cannot open file");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

inline Box parse_bbox(const nlohmann::json& rec, const std::string& where) {
    if (!rec.contains("bbox") || !rec["bbox"].is_array() || rec["bbox"].size() != 4)
        throw parse_error(where + ": bbox must be [x, y, w, h]");
    Box b{rec["bbox"][0].get<double>(), rec["bbox"][1].get<double>(),
          rec["bbox"][2].get<double>(), rec["bbox"][3].get<double>()};
    if (!b.valid())
        throw parse_error(where + ": bbox has non-positive or non-finite extent");
    return b;
}

inline int64_t require_id(const nlohmann::json& rec, const char* key, const std::string& where) {
    if (!rec.contains(key) || !rec[key].is_number_integer())
        throw parse_error(where + ": missing or non-integer '" + key + "'");
    return rec[key].get<int64_t>();
}

} // namespace detail

// COCO annotation file: {"images": [{"id": ...}], "categories":
// [{"id": ..., "name": ...}], "annotations": [{"image_id": ...,
// "category_id": ..., "bbox": [x, y, w, h]}]}. Pixel units throughout.
inline GroundTruthSet load_coco_ground_truth(const std::string& path) {
    const nlohmann::json j = detail::load_json_file(path);
    if (!j.is_object() || !j.contains("images") || !j.contains("annotations") ||
        !j.contains("categories"))
        throw parse_error(path + ": expected object with images, annotations, categories");

    GroundTruthSet gts;
    size_t idx = 0;
    for (const auto& img : j["images"]) {
        const std::string where = path + ": images[" + std::to_string(idx++) + "]";
        const int64_t id = detail::require_id(img, "id", where);
        if (!gts.image_ids.insert(id).second)
            throw parse_error(where + ": duplicate image id " + std::to_string(id));
    }
    idx = 0;
    for (const auto& cat : j["categories"]) {
        const std::string where = path + ": categories[" + std::to_string(idx++) + "]";
        const int64_t id = detail::require_id(cat, "id", where);
        std::string name = cat.contains("name") ? cat["name"].get<std::string>()
                                                : std::to_string(id);
        if (!gts.categories.emplace(id, std::move(name)).second)
            throw parse_error(where + ": duplicate category id " + std::to_string(id));
    }
    idx = 0;
    for (const auto& ann : j["annotations"]) {
        const std::string where = path + ": annotations[" + std::to_string(idx++) + "]";
        GtAnnotation a;
        a.image_id = detail::require_id(ann, "image_id", where);
        a.category_id = detail::require_id(ann, "category_id", where);
        a.box = detail::parse_bbox(ann, where);
        if (gts.image_ids.count(a.image_id) == 0)
            throw parse_error(where + ": unknown image_id " + std::to_string(a.image_id));
        if (gts.categories.count(a.category_id) == 0)
            throw parse_error(where + ": unknown category_id " + std::to_string(a.category_id));
        gts.annotations.push_back(a);
    }
    return gts;
}

// COCO results file: [{"image_id": ..., "category_id": ...,
// "bbox": [x, y, w, h], "score": ...}].
inline std::vector<Detection> load_coco_detections(const std::string& path) {
    const nlohmann::json j = detail::load_json_file(path);
    if (!j.is_array())
        throw parse_error(path + ": expected a top-level array of detections");
    std::vector<Detection> dets;
    dets.reserve(j.size());
    size_t idx = 0;
    for (const auto& rec : j) {
        const std::string where = path + ": detections[" + std::to_string(idx++) + "]";
        Detection d;
        d.image_id = detail::require_id(rec, "image_id", where);
        d.category_id = detail::require_id(rec, "category_id", where);
        d.box = detail::parse_bbox(rec, where);
        if (!rec.contains("score") || !rec["score"].is_number())
            throw parse_error(where + ": missing or non-numeric 'score'");
        d.score = rec["score"].get<double>();
        if (!(d.score >= 0.0 && d.score <= 1.0))
            throw parse_error(where + ": score outside [0,1]");
        dets.push_back(d);
    }
    return dets;
}

} // namespace tinydet
