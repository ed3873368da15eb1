#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "posenorm/pose_skeleton.hpp"
#include "posenorm/rng.hpp"

using namespace posenorm;

namespace {

std::string triples(int count, const std::string& triple) {
    std::string s = "img0 ";
    for (int i = 0; i < count; ++i) {
        if (i) s += ",";
        s += triple;
    }
    return s;
}

KeypointSet random_pose(Rng& rng) {
    KeypointSet kp;
    for (auto& j : kp.joints) {
        j.x = rng.uniform(0.05, 0.95);
        j.y = rng.uniform(0.05, 0.95);
        j.visible = rng.uniform() < 0.8;
    }
    return kp;
}

}  // namespace

TEST_CASE("parse_keypoints accepts a full in-range record") {
    const KeypointSet kp = parse_keypoints(triples(18, "0.5:0.25:1"));
    for (const auto& j : kp.joints) {
        CHECK(j.visible);
        CHECK(j.x == doctest::Approx(0.5));
        CHECK(j.y == doctest::Approx(0.25));
    }
}

TEST_CASE("parse_keypoints enforces the joint count") {
    CHECK_THROWS_WITH_AS(parse_keypoints(triples(17, "0.5:0.5:1")),
                         doctest::Contains("expected 18 joints"), std::invalid_argument);
    CHECK_THROWS_AS(parse_keypoints(triples(19, "0.5:0.5:1")), std::invalid_argument);
}

TEST_CASE("parse_keypoints demotes out-of-range visible joints") {
    std::string rec = "img0 ";
    for (int i = 0; i < 18; ++i) {
        if (i) rec += ",";
        rec += i == 5 ? "1.3:0.2:1" : "0.4:0.4:1";
    }
    const KeypointSet kp = parse_keypoints(rec);
    CHECK_FALSE(kp.joints[5].visible);
    CHECK(kp.joints[4].visible);
    CHECK(kp.joints[6].visible);
}

TEST_CASE("parse_keypoints rejects malformed fields by name") {
    // non-finite coordinate on a visible joint
    std::string rec = "img0 ";
    for (int i = 0; i < 18; ++i) {
        if (i) rec += ",";
        rec += i == 3 ? "nan:0.2:1" : "0.4:0.4:1";
    }
    CHECK_THROWS_WITH_AS(parse_keypoints(rec), doctest::Contains("joint 3"),
                         std::invalid_argument);

    // invisible joints carry no coordinate constraint
    std::string rec2 = "img0 ";
    for (int i = 0; i < 18; ++i) {
        if (i) rec2 += ",";
        rec2 += i == 3 ? "nan:0.2:0" : "0.4:0.4:1";
    }
    CHECK_NOTHROW(parse_keypoints(rec2));

    CHECK_THROWS_AS(parse_keypoints(triples(18, "0.5;0.5;1")), std::invalid_argument);
    CHECK_THROWS_AS(parse_keypoints(triples(18, "0.5:0.5:2")), std::invalid_argument);
    CHECK_THROWS_AS(parse_keypoints("lonely_id"), std::invalid_argument);
}

TEST_CASE("keypoint records round-trip through format/parse") {
    Rng rng(7);
    const KeypointSet kp = random_pose(rng);
    const KeypointRecord rec = parse_keypoint_record(format_keypoint_record("sample_42", kp));
    CHECK(rec.image_id == "sample_42");
    for (int j = 0; j < kNumJoints; ++j) {
        CHECK(rec.keypoints.joints[j].visible == kp.joints[j].visible);
        CHECK(rec.keypoints.joints[j].x == kp.joints[j].x);
        CHECK(rec.keypoints.joints[j].y == kp.joints[j].y);
    }
}

TEST_CASE("rasterize_pose validates dims") {
    CHECK_THROWS_AS(rasterize_pose(KeypointSet::all_invisible(), default_limb_schema(), 32, 32),
                    std::invalid_argument);
    CHECK_THROWS_AS(rasterize_pose(KeypointSet::all_invisible(), default_limb_schema(), 8, 4),
                    std::invalid_argument);
}

TEST_CASE("all-invisible keypoints render pure background") {
    const PoseImage img =
        rasterize_pose(KeypointSet::all_invisible(), default_limb_schema(), 64, 32);
    for (double v : img.data) CHECK(v == -1.0);
}

TEST_CASE("single limb matches the scan-line oracle") {
    LimbSchema schema;
    schema.limbs = {{0, 1, {1.0, 0.0, 0.0}}};
    schema.joint_radius = 0.0;  // discs off so the stroke is the only ink
    schema.limb_thickness = 1.0;

    KeypointSet kp = KeypointSet::all_invisible();
    kp.joints[0] = {0.25, 0.25, true};
    kp.joints[1] = {0.75, 0.75, true};

    const int h = 64, w = 32;
    const PoseImage img = rasterize_pose(kp, schema, h, w);

    const auto expected =
        oracle::scan_rasterize(h, w, 0.25 * (w - 1), 0.25 * (h - 1), 0.75 * (w - 1),
                               0.75 * (h - 1), schema.limb_thickness);
    std::set<std::pair<int, int>> painted;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (img.at(0, y, x) != -1.0) painted.insert({y, x});
    CHECK(painted == expected);
    CHECK_FALSE(painted.empty());
    for (const auto& [y, x] : painted) {
        CHECK(img.at(0, y, x) == 1.0);   // red mapped to [-1,1]
        CHECK(img.at(1, y, x) == -1.0);
        CHECK(img.at(2, y, x) == -1.0);
    }
}

TEST_CASE("rasterization is deterministic") {
    Rng rng(11);
    const KeypointSet kp = random_pose(rng);
    const PoseImage a = rasterize_pose(kp, default_limb_schema(), 64, 32);
    const PoseImage b = rasterize_pose(kp, default_limb_schema(), 64, 32);
    CHECK(a.data == b.data);
}

TEST_CASE("every painted pixel carries a schema color or the joint color") {
    const LimbSchema& schema = default_limb_schema();
    std::set<std::array<double, 3>> allowed;
    for (const auto& limb : schema.limbs) allowed.insert(to_signed(limb.color));
    allowed.insert(to_signed(schema.joint_color));

    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const PoseImage img = rasterize_pose(random_pose(rng), schema, 64, 32);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                const auto px = img.pixel(y, x);
                if (px == std::array<double, 3>{-1.0, -1.0, -1.0}) continue;
                CHECK(allowed.count(px) == 1);
            }
    }
}

TEST_CASE("limbs with an invisible endpoint contribute no pixels") {
    LimbSchema schema;
    schema.limbs = {{0, 1, {0.0, 1.0, 0.0}}};
    schema.joint_radius = 0.0;
    KeypointSet kp = KeypointSet::all_invisible();
    kp.joints[0] = {0.2, 0.2, true};
    kp.joints[1] = {0.8, 0.8, false};
    const PoseImage img = rasterize_pose(kp, schema, 64, 32);
    for (double v : img.data) CHECK(v == -1.0);
}

TEST_CASE("later limbs overpaint earlier ones") {
    LimbSchema schema;
    schema.limbs = {{0, 1, {1.0, 0.0, 0.0}}, {2, 3, {0.0, 0.0, 1.0}}};
    schema.joint_radius = 0.0;
    schema.limb_thickness = 2.0;
    KeypointSet kp = KeypointSet::all_invisible();
    kp.joints[0] = {0.5, 0.2, true};
    kp.joints[1] = {0.5, 0.8, true};
    kp.joints[2] = {0.5, 0.2, true};
    kp.joints[3] = {0.5, 0.8, true};  // same stroke, drawn second in blue
    const PoseImage img = rasterize_pose(kp, schema, 64, 32);
    bool any = false;
    for (int y = 0; y < img.h && !any; ++y)
        for (int x = 0; x < img.w; ++x)
            if (img.at(2, y, x) == 1.0) {
                any = true;
                break;
            }
    CHECK(any);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) CHECK(img.at(0, y, x) != 1.0);  // no red survives
}

TEST_CASE("default schema has 17 limbs with pairwise distinct colors") {
    const LimbSchema& schema = default_limb_schema();
    CHECK(schema.limbs.size() == 17);
    std::set<std::array<double, 3>> colors;
    for (const auto& limb : schema.limbs) {
        CHECK(limb.a >= 0);
        CHECK(limb.a < kNumJoints);
        CHECK(limb.b >= 0);
        CHECK(limb.b < kNumJoints);
        colors.insert(limb.color);
    }
    CHECK(colors.size() == schema.limbs.size());
}
