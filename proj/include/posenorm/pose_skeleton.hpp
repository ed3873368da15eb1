#pragma once

#include <array>
#include <string>
#include <vector>

#include "posenorm/image.hpp"

namespace posenorm {

// 18-keypoint skeleton in the COCO-style ordering used by common pose toolkits.
enum JointId : int {
    kNose = 0,
    kNeck,
    kRShoulder,
    kRElbow,
    kRWrist,
    kLShoulder,
    kLElbow,
    kLWrist,
    kRHip,
    kRKnee,
    kRAnkle,
    kLHip,
    kLKnee,
    kLAnkle,
    kREye,
    kLEye,
    kREar,
    kLEar,
};

constexpr int kNumJoints = 18;

const char* joint_name(int joint);

struct Keypoint {
    double x = 0.0;  // normalized horizontal coordinate in [0,1]
    double y = 0.0;  // normalized vertical coordinate in [0,1]
    bool visible = false;
};

struct KeypointSet {
    std::array<Keypoint, kNumJoints> joints;

    static KeypointSet all_invisible() { return KeypointSet{}; }
};

struct Limb {
    int a = 0;
    int b = 0;
    std::array<double, 3> color = {1.0, 1.0, 1.0};  // in [0,1]
};

// Fixed drawing convention for pose images: which joint pairs form limbs,
// the per-limb color table, and stroke geometry. Colors are in [0,1] and get
// mapped to [-1,1] when drawn.
struct LimbSchema {
    std::vector<Limb> limbs;
    double joint_radius = 1.0;    // pixels; <= 0 disables joint discs
    double limb_thickness = 1.5;  // pixels
    std::array<double, 3> joint_color = {1.0, 1.0, 1.0};
};

// 17-limb skeleton topology with colors evenly spaced in hue.
const LimbSchema& default_limb_schema();

// Parse one keypoint record: `image_id` followed by 18 comma-separated
// `x:y:v` triples. Visible joints with finite coordinates outside [0,1] are
// demoted to invisible; non-finite coordinates on a visible joint are an error.
struct KeypointRecord {
    std::string image_id;
    KeypointSet keypoints;
};

KeypointRecord parse_keypoint_record(const std::string& line);
KeypointSet parse_keypoints(const std::string& line);

std::string format_keypoint_record(const std::string& image_id, const KeypointSet& kp);

// Render the skeleton into a pose image: background -1 everywhere, each limb
// with both endpoints visible drawn as a hard-edged segment of its schema
// color, joint discs drawn last. Requires h == 2*w and w >= 8.
PoseImage rasterize_pose(const KeypointSet& kp, const LimbSchema& schema, int h, int w);

// Segment/disc painting shared with the synthetic renderer.
void paint_segment(Image& img, double x0, double y0, double x1, double y1,
                   double thickness, const std::array<double, 3>& signed_color);
void paint_disc(Image& img, double cx, double cy, double radius,
                const std::array<double, 3>& signed_color);

std::array<double, 3> hsv_to_rgb(double h, double s, double v);

}  // namespace posenorm
