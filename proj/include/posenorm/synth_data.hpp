#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "posenorm/dataset.hpp"

namespace posenorm {

// An identity is a color palette plus limb proportions; palettes are kept
// well separated so identity is machine-checkable on rendered pixels.
struct StickIdentity {
    int id = 0;
    std::array<double, 3> torso{};
    std::array<double, 3> legs{};
    std::array<double, 3> head{};
    std::optional<std::array<double, 3>> bag;
    double arm_scale = 1.0;
    double leg_scale = 1.0;

    std::vector<std::array<double, 3>> palette_colors() const;
};

// Stroke geometry shared by the renderer and the pose-mask oracle.
struct RenderGeometry {
    double limb_thickness = 2.5;
    double torso_thickness = 5.0;
    double head_radius = 3.5;
    double bag_radius = 2.0;
};

struct SynthConfig {
    int n_identities = 10;
    int images_per_identity = 8;
    int n_cameras = 2;
    int h = 64;
    int w = 32;
    uint64_t seed = 1;
    std::string domain = "a";  // "a" and "b" differ in backgrounds and pose families
    double pose_jitter_deg = 8.0;
    RenderGeometry geometry;
};

struct SyntheticMeta {
    std::vector<StickIdentity> identities;
    std::vector<std::array<double, 3>> camera_colors;  // in [0,1]
    RenderGeometry geometry;
    std::string domain;
};

struct SynthDataset {
    Dataset data;
    SyntheticMeta meta;
    bool has_meta = false;
};

// Camera background palettes per domain.
std::vector<std::array<double, 3>> domain_camera_colors(const std::string& domain, int n_cameras);

// Parametric pose bank for a domain (a small family of limb-angle presets).
struct PoseParams {
    double center_x = 0.5;
    double top_y = 0.18;
    double torso_len = 0.30;
    double shoulder_half = 0.14;
    double hip_half = 0.09;
    // Angles in degrees measured from straight down, mirrored per side.
    double r_arm_upper = 20, r_arm_lower = 15;
    double l_arm_upper = 20, l_arm_lower = 15;
    double r_leg_upper = 8, r_leg_lower = 5;
    double l_leg_upper = 8, l_leg_lower = 5;
};

std::vector<PoseParams> domain_pose_bank(const std::string& domain);

KeypointSet build_pose(const PoseParams& p, double arm_scale = 1.0, double leg_scale = 1.0);

// Deterministic render: camera-colored background, palette-colored limbs,
// head disc, optional bag disc.
PersonImage render_stickperson(const StickIdentity& identity, const KeypointSet& kp,
                               const std::array<double, 3>& camera_color, int h, int w,
                               const RenderGeometry& geometry = {});

// Binary silhouette of the stick figure under the same geometry.
std::vector<unsigned char> stick_mask(const KeypointSet& kp, int h, int w,
                                      const RenderGeometry& geometry = {});

SynthDataset generate_dataset(const SynthConfig& cfg);

// Sentinel returned when an image has no detectable foreground.
constexpr double kNoForegroundDistance = 3.4641016151377544;  // sqrt(12)

// Symmetric chamfer distance between the image's foreground colors and the
// identity's palette, in the [-1,1] RGB cube. Foreground is estimated against
// the border-mean background color.
double identity_palette_distance(const PersonImage& img, const StickIdentity& identity);

// IoU between the image's foreground mask and the thick-limb mask of kp.
double pose_mask_iou(const PersonImage& img, const KeypointSet& kp,
                     const RenderGeometry& geometry = {});

// Dataset directory I/O: images/<sample_id>.ppm, keypoints.txt, manifest.json.
void write_dataset(const std::string& dir, const SynthDataset& ds);
SynthDataset load_dataset(const std::string& dir);

}  // namespace posenorm
