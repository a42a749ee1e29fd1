#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <unistd.h>

#include "tinydet/coco_io.hpp"

namespace fs = std::filesystem;

namespace {

// scratch directory torn down at the end of each test case
struct TempDir {
    fs::path root;
    TempDir() {
        root = fs::temp_directory_path() /
               ("tinydet_io_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(root);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
    std::string write(const std::string& name, const std::string& body) const {
        const fs::path p = root / name;
        std::ofstream out(p);
        out << body;
        return p.string();
    }
    static inline int counter = 0;
};

const char* kValidGt = R"({
  "images": [{"id": 1}, {"id": 2}],
  "categories": [{"id": 10, "name": "drone"}, {"id": 11}],
  "annotations": [
    {"image_id": 1, "category_id": 10, "bbox": [0, 0, 4, 4]},
    {"image_id": 2, "category_id": 11, "bbox": [5.5, 6.25, 30, 20]}
  ]
})";

} // namespace

TEST_CASE("ground truth round trip") {
    TempDir tmp;
    const std::string path = tmp.write("gt.json", kValidGt);
    const tinydet::GroundTruthSet gts = tinydet::load_coco_ground_truth(path);
    CHECK(gts.image_ids == std::set<int64_t>{1, 2});
    REQUIRE(gts.categories.size() == 2);
    CHECK(gts.categories.at(10) == "drone");
    CHECK(gts.categories.at(11) == "11"); // name defaults to the id
    REQUIRE(gts.annotations.size() == 2);
    CHECK(gts.annotations[0].image_id == 1);
    CHECK(gts.annotations[1].box.x == 5.5);
    CHECK(gts.annotations[1].box.h == 20.0);
}

TEST_CASE("detections round trip") {
    TempDir tmp;
    const std::string path = tmp.write("det.json", R"([
      {"image_id": 1, "category_id": 10, "bbox": [1, 2, 3, 4], "score": 0.75},
      {"image_id": 2, "category_id": 11, "bbox": [0, 0, 8, 8], "score": 1.0}
    ])");
    const std::vector<tinydet::Detection> dets = tinydet::load_coco_detections(path);
    REQUIRE(dets.size() == 2);
    CHECK(dets[0].score == 0.75);
    CHECK(dets[0].box.w == 3.0);
    CHECK(dets[1].image_id == 2);
}

TEST_CASE("missing file names the path") {
    const std::string path = "/nonexistent/gt.json";
    try {
        tinydet::load_coco_ground_truth(path);
        FAIL("expected parse_error");
    } catch (const tinydet::parse_error& e) {
        CHECK(std::string(e.what()).find(path) != std::string::npos);
    }
}

TEST_CASE("malformed json names the file") {
    TempDir tmp;
    const std::string path = tmp.write("bad.json", "{\"images\": [");
    try {
        tinydet::load_coco_ground_truth(path);
        FAIL("expected parse_error");
    } catch (const tinydet::parse_error& e) {
        CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
    }
}

TEST_CASE("missing top-level keys are rejected") {
    TempDir tmp;
    const std::string path =
        tmp.write("gt.json", R"({"images": [], "annotations": []})");
    CHECK_THROWS_AS(tinydet::load_coco_ground_truth(path), tinydet::parse_error);
}

TEST_CASE("record errors carry the record index") {
    TempDir tmp;
    SECTION("image without id") {
        const std::string path = tmp.write("gt.json", R"({
          "images": [{"id": 1}, {"name": "oops"}],
          "categories": [], "annotations": []})");
        try {
            tinydet::load_coco_ground_truth(path);
            FAIL("expected parse_error");
        } catch (const tinydet::parse_error& e) {
            CHECK(std::string(e.what()).find("images[1]") != std::string::npos);
        }
    }
    SECTION("annotation with malformed bbox") {
        const std::string path = tmp.write("gt.json", R"({
          "images": [{"id": 1}],
          "categories": [{"id": 1}],
          "annotations": [{"image_id": 1, "category_id": 1, "bbox": [0, 0, 4]}]})");
        try {
            tinydet::load_coco_ground_truth(path);
            FAIL("expected parse_error");
        } catch (const tinydet::parse_error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("annotations[0]") != std::string::npos);
            CHECK(msg.find("bbox") != std::string::npos);
        }
    }
}

TEST_CASE("duplicate ids are rejected") {
    TempDir tmp;
    SECTION("image ids") {
        const std::string path = tmp.write("gt.json", R"({
          "images": [{"id": 3}, {"id": 3}],
          "categories": [], "annotations": []})");
        CHECK_THROWS_WITH(tinydet::load_coco_ground_truth(path),
                          Catch::Matchers::ContainsSubstring("duplicate image id 3"));
    }
    SECTION("category ids") {
        const std::string path = tmp.write("gt.json", R"({
          "images": [],
          "categories": [{"id": 5, "name": "a"}, {"id": 5, "name": "b"}],
          "annotations": []})");
        CHECK_THROWS_WITH(tinydet::load_coco_ground_truth(path),
                          Catch::Matchers::ContainsSubstring("duplicate category id 5"));
    }
}

TEST_CASE("annotations referencing unknown ids are rejected") {
    TempDir tmp;
    SECTION("unknown image") {
        const std::string path = tmp.write("gt.json", R"({
          "images": [{"id": 1}],
          "categories": [{"id": 1}],
          "annotations": [{"image_id": 9, "category_id": 1, "bbox": [0, 0, 1, 1]}]})");
        CHECK_THROWS_WITH(tinydet::load_coco_ground_truth(path),
                          Catch::Matchers::ContainsSubstring("unknown image_id 9"));
    }
    SECTION("unknown category") {
        const std::string path = tmp.write("gt.json", R"({
          "images": [{"id": 1}],
          "categories": [{"id": 1}],
          "annotations": [{"image_id": 1, "category_id": 9, "bbox": [0, 0, 1, 1]}]})");
        CHECK_THROWS_WITH(tinydet::load_coco_ground_truth(path),
                          Catch::Matchers::ContainsSubstring("unknown category_id 9"));
    }
}

TEST_CASE("degenerate bboxes are rejected") {
    TempDir tmp;
    const std::string path = tmp.write("gt.json", R"({
      "images": [{"id": 1}],
      "categories": [{"id": 1}],
      "annotations": [{"image_id": 1, "category_id": 1, "bbox": [0, 0, 0, 5]}]})");
    CHECK_THROWS_WITH(tinydet::load_coco_ground_truth(path),
                      Catch::Matchers::ContainsSubstring("non-positive"));
}

TEST_CASE("detection file shape errors") {
    TempDir tmp;
    SECTION("top level must be an array") {
        const std::string path = tmp.write("det.json", R"({"detections": []})");
        CHECK_THROWS_WITH(tinydet::load_coco_detections(path),
                          Catch::Matchers::ContainsSubstring("top-level array"));
    }
    SECTION("score is required") {
        const std::string path = tmp.write("det.json",
            R"([{"image_id": 1, "category_id": 1, "bbox": [0, 0, 1, 1]}])");
        CHECK_THROWS_WITH(tinydet::load_coco_detections(path),
                          Catch::Matchers::ContainsSubstring("score"));
    }
    SECTION("score must lie in the unit interval") {
        const std::string path = tmp.write("det.json",
            R"([{"image_id": 1, "category_id": 1, "bbox": [0, 0, 1, 1], "score": 1.5}])");
        CHECK_THROWS_WITH(tinydet::load_coco_detections(path),
                          Catch::Matchers::ContainsSubstring("detections[0]"));
    }
    SECTION("non-integer ids are rejected") {
        const std::string path = tmp.write("det.json",
            R"([{"image_id": 1.5, "category_id": 1, "bbox": [0, 0, 1, 1], "score": 0.5}])");
        CHECK_THROWS_WITH(tinydet::load_coco_detections(path),
                          Catch::Matchers::ContainsSubstring("image_id"));
    }
}

TEST_CASE("empty collections load cleanly") {
    TempDir tmp;
    const std::string gt_path = tmp.write(
        "gt.json", R"({"images": [], "categories": [], "annotations": []})");
    const tinydet::GroundTruthSet gts = tinydet::load_coco_ground_truth(gt_path);
    CHECK(gts.annotations.empty());
    const std::string det_path = tmp.write("det.json", "[]");
    CHECK(tinydet::load_coco_detections(det_path).empty());
}
