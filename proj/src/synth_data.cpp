#include "posenorm/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "posenorm/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace posenorm {

namespace {

constexpr double kDegToRad = 0.017453292519943295;
constexpr double kFgThreshold = 0.35;  // foreground cutoff in the [-1,1] RGB cube

double color_dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double clamp01(double v, double lo = 0.03, double hi = 0.97) {
    return std::clamp(v, lo, hi);
}

}  // namespace

std::vector<std::array<double, 3>> StickIdentity::palette_colors() const {
    std::vector<std::array<double, 3>> colors = {torso, legs, head};
    if (bag) colors.push_back(*bag);
    return colors;
}

std::vector<std::array<double, 3>> domain_camera_colors(const std::string& domain, int n_cameras) {
    static const std::vector<std::array<double, 3>> domain_a = {
        {0.13, 0.13, 0.16}, {0.22, 0.18, 0.14}, {0.10, 0.18, 0.12}, {0.18, 0.12, 0.18}};
    static const std::vector<std::array<double, 3>> domain_b = {
        {0.86, 0.86, 0.80}, {0.72, 0.78, 0.88}, {0.88, 0.76, 0.70}, {0.78, 0.88, 0.78}};
    const auto& table = domain == "b" ? domain_b : domain_a;
    if (domain != "a" && domain != "b")
        throw std::invalid_argument("domain_camera_colors: unknown domain '" + domain + "'");
    if (n_cameras < 1 || n_cameras > static_cast<int>(table.size()))
        throw std::invalid_argument("domain_camera_colors: supported camera count is 1.." +
                                    std::to_string(table.size()));
    return {table.begin(), table.begin() + n_cameras};
}

std::vector<PoseParams> domain_pose_bank(const std::string& domain) {
    std::vector<PoseParams> bank;
    if (domain == "a") {
        // Everyday walking/standing poses: arms near the body.
        PoseParams stand;
        bank.push_back(stand);
        PoseParams walk1;
        walk1.r_leg_upper = 22;
        walk1.l_leg_upper = -14;
        walk1.r_arm_upper = 30;
        walk1.l_arm_upper = 10;
        bank.push_back(walk1);
        PoseParams walk2;
        walk2.r_leg_upper = -16;
        walk2.l_leg_upper = 20;
        walk2.r_arm_upper = 12;
        walk2.l_arm_upper = 32;
        walk2.l_arm_lower = 28;
        bank.push_back(walk2);
        PoseParams lean;
        lean.center_x = 0.46;
        lean.r_arm_upper = 38;
        lean.r_arm_lower = 30;
        lean.l_leg_upper = 12;
        bank.push_back(lean);
    } else if (domain == "b") {
        // Raised-arm and wide-stance families.
        PoseParams wave;
        wave.r_arm_upper = 150;
        wave.r_arm_lower = 160;
        wave.l_arm_upper = 25;
        bank.push_back(wave);
        PoseParams both_up;
        both_up.r_arm_upper = 140;
        both_up.r_arm_lower = 150;
        both_up.l_arm_upper = 140;
        both_up.l_arm_lower = 150;
        bank.push_back(both_up);
        PoseParams tpose;
        tpose.r_arm_upper = 90;
        tpose.r_arm_lower = 90;
        tpose.l_arm_upper = 90;
        tpose.l_arm_lower = 90;
        tpose.r_leg_upper = 18;
        tpose.l_leg_upper = 18;
        bank.push_back(tpose);
        PoseParams stride;
        stride.r_leg_upper = 30;
        stride.l_leg_upper = -22;
        stride.r_arm_upper = 70;
        stride.l_arm_upper = 15;
        bank.push_back(stride);
    } else {
        throw std::invalid_argument("domain_pose_bank: unknown domain '" + domain + "'");
    }
    return bank;
}

KeypointSet build_pose(const PoseParams& p, double arm_scale, double leg_scale) {
    KeypointSet kp;
    auto set = [&](int j, double x, double y) {
        kp.joints[static_cast<size_t>(j)] = {clamp01(x), clamp01(y), true};
    };

    const double neck_x = p.center_x, neck_y = p.top_y;
    const double hip_y = p.top_y + p.torso_len;
    // Right side of the body is drawn on the viewer's left (smaller x).
    set(kNeck, neck_x, neck_y);
    set(kNose, neck_x, neck_y - 0.055);
    set(kREye, neck_x - 0.018, neck_y - 0.065);
    set(kLEye, neck_x + 0.018, neck_y - 0.065);
    set(kREar, neck_x - 0.034, neck_y - 0.05);
    set(kLEar, neck_x + 0.034, neck_y - 0.05);

    const double rsx = neck_x - p.shoulder_half, lsx = neck_x + p.shoulder_half;
    const double sy = neck_y + 0.02;
    set(kRShoulder, rsx, sy);
    set(kLShoulder, lsx, sy);
    const double rhx = neck_x - p.hip_half, lhx = neck_x + p.hip_half;
    set(kRHip, rhx, hip_y);
    set(kLHip, lhx, hip_y);

    const double arm_upper = 0.11 * arm_scale, arm_lower = 0.10 * arm_scale;
    const double leg_upper = 0.145 * leg_scale, leg_lower = 0.135 * leg_scale;
    // Angles open outward from straight down; the right side mirrors in x.
    auto swing = [](double deg) {
        return std::pair<double, double>(std::sin(deg * kDegToRad), std::cos(deg * kDegToRad));
    };

    auto [rux, ruy] = swing(p.r_arm_upper);
    const double rex = rsx - arm_upper * rux, rey = sy + arm_upper * ruy;
    set(kRElbow, rex, rey);
    auto [rlx, rly] = swing(p.r_arm_lower);
    set(kRWrist, rex - arm_lower * rlx, rey + arm_lower * rly);

    auto [lux, luy] = swing(p.l_arm_upper);
    const double lex = lsx + arm_upper * lux, ley = sy + arm_upper * luy;
    set(kLElbow, lex, ley);
    auto [llx, lly] = swing(p.l_arm_lower);
    set(kLWrist, lex + arm_lower * llx, ley + arm_lower * lly);

    auto [rkux, rkuy] = swing(p.r_leg_upper);
    const double rkx = rhx - leg_upper * rkux, rky = hip_y + leg_upper * rkuy;
    set(kRKnee, rkx, rky);
    auto [rklx, rkly] = swing(p.r_leg_lower);
    set(kRAnkle, rkx - leg_lower * rklx, rky + leg_lower * rkly);

    auto [lkux, lkuy] = swing(p.l_leg_upper);
    const double lkx = lhx + leg_upper * lkux, lky = hip_y + leg_upper * lkuy;
    set(kLKnee, lkx, lky);
    auto [lklx, lkly] = swing(p.l_leg_lower);
    set(kLAnkle, lkx + leg_lower * lklx, lky + leg_lower * lkly);

    return kp;
}

namespace {

struct StickColors {
    std::array<double, 3> torso;
    std::array<double, 3> legs;
    std::array<double, 3> head;
    std::optional<std::array<double, 3>> bag;
};

// Shared figure painter so the renderer and the mask oracle use identical
// geometry. Colors are already in [-1,1].
void paint_stick_figure(Image& img, const KeypointSet& kp, const StickColors& colors,
                        const RenderGeometry& geom) {
    const double sx = img.w - 1, sy = img.h - 1;
    auto px = [&](int j) { return kp.joints[static_cast<size_t>(j)].x * sx; };
    auto py = [&](int j) { return kp.joints[static_cast<size_t>(j)].y * sy; };
    auto vis = [&](int a, int b) {
        return kp.joints[static_cast<size_t>(a)].visible && kp.joints[static_cast<size_t>(b)].visible;
    };
    auto seg = [&](int a, int b, const std::array<double, 3>& col, double thick) {
        if (vis(a, b)) paint_segment(img, px(a), py(a), px(b), py(b), thick, col);
    };

    // Legs first so the torso overpaints the hip junction.
    seg(kRHip, kRKnee, colors.legs, geom.limb_thickness);
    seg(kRKnee, kRAnkle, colors.legs, geom.limb_thickness);
    seg(kLHip, kLKnee, colors.legs, geom.limb_thickness);
    seg(kLKnee, kLAnkle, colors.legs, geom.limb_thickness);

    seg(kNeck, kRHip, colors.torso, geom.torso_thickness);
    seg(kNeck, kLHip, colors.torso, geom.torso_thickness);
    seg(kRHip, kLHip, colors.torso, geom.torso_thickness);
    seg(kRShoulder, kLShoulder, colors.torso, geom.torso_thickness);

    seg(kRShoulder, kRElbow, colors.torso, geom.limb_thickness);
    seg(kRElbow, kRWrist, colors.torso, geom.limb_thickness);
    seg(kLShoulder, kLElbow, colors.torso, geom.limb_thickness);
    seg(kLElbow, kLWrist, colors.torso, geom.limb_thickness);

    if (kp.joints[kNose].visible)
        paint_disc(img, px(kNose), py(kNose), geom.head_radius, colors.head);

    // The bag is worn on the torso: centered on the neck-hip stroke and no
    // wider than it, so it recolors the figure without changing its
    // silhouette.
    if (colors.bag && vis(kNeck, kLHip)) {
        const double cx = 0.5 * (px(kNeck) + px(kLHip));
        const double cy = 0.5 * (py(kNeck) + py(kLHip));
        const double radius = std::min(geom.bag_radius, 0.5 * geom.torso_thickness);
        paint_disc(img, cx, cy, radius, *colors.bag);
    }
}

}  // namespace

PersonImage render_stickperson(const StickIdentity& identity, const KeypointSet& kp,
                               const std::array<double, 3>& camera_color, int h, int w,
                               const RenderGeometry& geometry) {
    PersonImage img = Image::filled(h, w, to_signed(camera_color));
    StickColors colors{to_signed(identity.torso), to_signed(identity.legs),
                       to_signed(identity.head), std::nullopt};
    if (identity.bag) colors.bag = to_signed(*identity.bag);
    paint_stick_figure(img, kp, colors, geometry);
    return img;
}

std::vector<unsigned char> stick_mask(const KeypointSet& kp, int h, int w,
                                      const RenderGeometry& geometry) {
    Image canvas = Image::filled(h, w, {-1.0, -1.0, -1.0});
    StickColors white{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, std::array<double, 3>{1, 1, 1}};
    paint_stick_figure(canvas, kp, white, geometry);
    std::vector<unsigned char> mask(static_cast<size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (canvas.at(0, y, x) > 0.0) mask[static_cast<size_t>(y) * w + x] = 1;
    return mask;
}

namespace {

std::array<double, 3> border_mean(const PersonImage& img) {
    double sum[3] = {0, 0, 0};
    int count = 0;
    auto acc = [&](int y, int x) {
        for (int c = 0; c < 3; ++c) sum[c] += img.at(c, y, x);
        ++count;
    };
    for (int x = 0; x < img.w; ++x) {
        acc(0, x);
        acc(img.h - 1, x);
    }
    for (int y = 1; y < img.h - 1; ++y) {
        acc(y, 0);
        acc(y, img.w - 1);
    }
    return {sum[0] / count, sum[1] / count, sum[2] / count};
}

std::vector<unsigned char> foreground_mask(const PersonImage& img) {
    const std::array<double, 3> bg = border_mean(img);
    std::vector<unsigned char> mask(static_cast<size_t>(img.h) * img.w, 0);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const auto p = img.pixel(y, x);
            if (color_dist(p, bg) > kFgThreshold) mask[static_cast<size_t>(y) * img.w + x] = 1;
        }
    return mask;
}

}  // namespace

double identity_palette_distance(const PersonImage& img, const StickIdentity& identity) {
    const std::vector<unsigned char> fg = foreground_mask(img);
    std::vector<std::array<double, 3>> palette;
    for (const auto& c : identity.palette_colors()) palette.push_back(to_signed(c));

    double fg_term = 0.0;
    int fg_count = 0;
    std::vector<double> nearest_to_palette(palette.size(), std::numeric_limits<double>::infinity());
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            if (!fg[static_cast<size_t>(y) * img.w + x]) continue;
            const auto p = img.pixel(y, x);
            double best = std::numeric_limits<double>::infinity();
            for (size_t k = 0; k < palette.size(); ++k) {
                const double d = color_dist(p, palette[k]);
                best = std::min(best, d);
                nearest_to_palette[k] = std::min(nearest_to_palette[k], d);
            }
            fg_term += best;
            ++fg_count;
        }
    if (fg_count == 0) return kNoForegroundDistance;
    fg_term /= fg_count;
    double pal_term = 0.0;
    for (double d : nearest_to_palette) pal_term += d;
    pal_term /= static_cast<double>(palette.size());
    return 0.5 * (fg_term + pal_term);
}

double pose_mask_iou(const PersonImage& img, const KeypointSet& kp,
                     const RenderGeometry& geometry) {
    const std::vector<unsigned char> a = foreground_mask(img);
    const std::vector<unsigned char> b = stick_mask(kp, img.h, img.w, geometry);
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] && b[i]) ++inter;
        if (a[i] || b[i]) ++uni;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// --------------------------------------------------------------- dataset

namespace {

std::array<double, 3> sample_color(Rng& rng) {
    auto ch = [&] { return (13 + rng.uniform_int(230)) / 255.0; };
    return {ch(), ch(), ch()};
}

double palette_separation(const StickIdentity& a, const StickIdentity& b) {
    double s = 0.0;
    const std::array<const std::array<double, 3>*, 3> pa = {&a.torso, &a.legs, &a.head};
    const std::array<const std::array<double, 3>*, 3> pb = {&b.torso, &b.legs, &b.head};
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) {
            const double d = (*pa[static_cast<size_t>(i)])[static_cast<size_t>(c)] -
                             (*pb[static_cast<size_t>(i)])[static_cast<size_t>(c)];
            s += d * d;
        }
    return std::sqrt(s);
}

bool clears_cameras(const std::array<double, 3>& color,
                    const std::vector<std::array<double, 3>>& cameras) {
    for (const auto& cam : cameras)
        if (color_dist(color, cam) < 0.3) return false;
    return true;
}

std::vector<StickIdentity> sample_identities(const SynthConfig& cfg,
                                             const std::vector<std::array<double, 3>>& cameras,
                                             Rng& rng) {
    // Farthest-point selection from a seeded candidate pool keeps palettes
    // well separated without tuning a rejection threshold.
    const int pool_size = std::max(64, cfg.n_identities * 8);
    std::vector<StickIdentity> pool;
    while (static_cast<int>(pool.size()) < pool_size) {
        StickIdentity cand;
        cand.torso = sample_color(rng);
        cand.legs = sample_color(rng);
        cand.head = sample_color(rng);
        if (!clears_cameras(cand.torso, cameras) || !clears_cameras(cand.legs, cameras) ||
            !clears_cameras(cand.head, cameras))
            continue;
        pool.push_back(cand);
    }
    std::vector<StickIdentity> chosen;
    std::vector<bool> used(pool.size(), false);
    chosen.push_back(pool[0]);
    used[0] = true;
    while (static_cast<int>(chosen.size()) < cfg.n_identities) {
        int best = -1;
        double best_d = -1.0;
        for (size_t i = 0; i < pool.size(); ++i) {
            if (used[i]) continue;
            double min_d = std::numeric_limits<double>::infinity();
            for (const auto& c : chosen) min_d = std::min(min_d, palette_separation(pool[i], c));
            if (min_d > best_d) {
                best_d = min_d;
                best = static_cast<int>(i);
            }
        }
        if (best < 0 || best_d < 0.3)
            throw std::runtime_error("generate_dataset: could not satisfy palette separation");
        used[static_cast<size_t>(best)] = true;
        chosen.push_back(pool[static_cast<size_t>(best)]);
    }
    for (int i = 0; i < cfg.n_identities; ++i) {
        auto& ident = chosen[static_cast<size_t>(i)];
        ident.id = i;
        ident.arm_scale = rng.uniform(0.9, 1.1);
        ident.leg_scale = rng.uniform(0.9, 1.1);
        if (rng.uniform() < 0.5) {
            std::array<double, 3> bag = sample_color(rng);
            while (!clears_cameras(bag, cameras)) bag = sample_color(rng);
            ident.bag = bag;
        }
    }
    return chosen;
}

std::string make_sample_id(int identity, int camera, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%03d_c%d_%02d", identity, camera, index);
    return buf;
}

}  // namespace

SynthDataset generate_dataset(const SynthConfig& cfg) {
    if (cfg.n_identities < 1 || cfg.images_per_identity < 1 || cfg.n_cameras < 1)
        throw std::invalid_argument("generate_dataset: counts must be positive");
    if (cfg.images_per_identity < 2 * cfg.n_cameras)
        throw std::invalid_argument(
            "generate_dataset: need at least two images per identity per camera");
    if (cfg.w < 8 || cfg.h != 2 * cfg.w)
        throw std::invalid_argument("generate_dataset: dims must satisfy h == 2*w, w >= 8");

    Rng rng(derive_seed(cfg.seed, "synth-data"));
    SynthDataset out;
    out.has_meta = true;
    out.meta.domain = cfg.domain;
    out.meta.geometry = cfg.geometry;
    out.meta.camera_colors = domain_camera_colors(cfg.domain, cfg.n_cameras);
    out.meta.identities = sample_identities(cfg, out.meta.camera_colors, rng);

    const std::vector<PoseParams> bank = domain_pose_bank(cfg.domain);
    const LimbSchema& schema = default_limb_schema();

    out.data.h = cfg.h;
    out.data.w = cfg.w;
    out.data.n_identities = cfg.n_identities;
    out.data.n_cameras = cfg.n_cameras;

    for (int id = 0; id < cfg.n_identities; ++id) {
        const StickIdentity& ident = out.meta.identities[static_cast<size_t>(id)];
        std::vector<int> per_camera(static_cast<size_t>(cfg.n_cameras), 0);
        for (int k = 0; k < cfg.images_per_identity; ++k) {
            const int camera = k % cfg.n_cameras;
            PoseParams pose = bank[static_cast<size_t>(rng.uniform_int(static_cast<int>(bank.size())))];
            const double j = cfg.pose_jitter_deg;
            pose.r_arm_upper += rng.uniform(-j, j);
            pose.r_arm_lower += rng.uniform(-j, j);
            pose.l_arm_upper += rng.uniform(-j, j);
            pose.l_arm_lower += rng.uniform(-j, j);
            pose.r_leg_upper += rng.uniform(-j, j);
            pose.r_leg_lower += rng.uniform(-j, j);
            pose.l_leg_upper += rng.uniform(-j, j);
            pose.l_leg_lower += rng.uniform(-j, j);
            pose.center_x += rng.uniform(-0.03, 0.03);

            DataSample sample;
            sample.keypoints = build_pose(pose, ident.arm_scale, ident.leg_scale);
            sample.identity = id;
            sample.camera = camera;
            sample.image = render_stickperson(ident, sample.keypoints,
                                              out.meta.camera_colors[static_cast<size_t>(camera)],
                                              cfg.h, cfg.w, cfg.geometry);
            sample.pose = rasterize_pose(sample.keypoints, schema, cfg.h, cfg.w);
            // Per (identity, camera): first image is the query, the rest
            // alternate train/gallery starting with train.
            const int pos = per_camera[static_cast<size_t>(camera)]++;
            if (pos == 0)
                sample.split = Split::query;
            else if (pos % 2 == 1)
                sample.split = Split::train;
            else
                sample.split = Split::gallery;
            sample.sample_id = make_sample_id(id, camera, pos);
            out.data.samples.push_back(std::move(sample));
        }
    }
    out.data.validate();
    return out;
}

// ------------------------------------------------------------------- I/O

namespace {

json color_to_json(const std::array<double, 3>& c) { return json::array({c[0], c[1], c[2]}); }

std::array<double, 3> color_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

void write_dataset(const std::string& dir, const SynthDataset& ds) {
    fs::create_directories(fs::path(dir) / "images");
    std::ofstream kp_file(fs::path(dir) / "keypoints.txt");
    if (!kp_file) throw std::runtime_error("write_dataset: cannot write keypoints.txt");

    json manifest;
    manifest["format_version"] = 1;
    manifest["h"] = ds.data.h;
    manifest["w"] = ds.data.w;
    manifest["n_identities"] = ds.data.n_identities;
    manifest["n_cameras"] = ds.data.n_cameras;
    manifest["samples"] = json::array();
    for (const auto& s : ds.data.samples) {
        write_ppm((fs::path(dir) / "images" / (s.sample_id + ".ppm")).string(), s.image);
        kp_file << format_keypoint_record(s.sample_id, s.keypoints) << "\n";
        manifest["samples"].push_back({{"sample_id", s.sample_id},
                                       {"identity", s.identity},
                                       {"camera", s.camera},
                                       {"split", split_name(s.split)}});
    }
    if (ds.has_meta) {
        json meta;
        meta["domain"] = ds.meta.domain;
        meta["camera_colors"] = json::array();
        for (const auto& c : ds.meta.camera_colors) meta["camera_colors"].push_back(color_to_json(c));
        meta["geometry"] = {{"limb_thickness", ds.meta.geometry.limb_thickness},
                            {"torso_thickness", ds.meta.geometry.torso_thickness},
                            {"head_radius", ds.meta.geometry.head_radius},
                            {"bag_radius", ds.meta.geometry.bag_radius}};
        meta["identities"] = json::array();
        for (const auto& ident : ds.meta.identities) {
            json ij = {{"id", ident.id},
                       {"torso", color_to_json(ident.torso)},
                       {"legs", color_to_json(ident.legs)},
                       {"head", color_to_json(ident.head)},
                       {"arm_scale", ident.arm_scale},
                       {"leg_scale", ident.leg_scale}};
            if (ident.bag) ij["bag"] = color_to_json(*ident.bag);
            meta["identities"].push_back(ij);
        }
        manifest["synthetic"] = meta;
    }
    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("write_dataset: cannot write manifest.json");
    mf << manifest.dump(2) << "\n";
}

SynthDataset load_dataset(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("load_dataset: missing manifest.json in " + dir);
    json manifest;
    mf >> manifest;

    SynthDataset out;
    out.data.h = manifest.at("h").get<int>();
    out.data.w = manifest.at("w").get<int>();
    out.data.n_identities = manifest.at("n_identities").get<int>();
    out.data.n_cameras = manifest.at("n_cameras").get<int>();

    std::map<std::string, KeypointSet> keypoints;
    {
        std::ifstream kf(fs::path(dir) / "keypoints.txt");
        if (!kf) throw std::runtime_error("load_dataset: missing keypoints.txt in " + dir);
        std::string line;
        while (std::getline(kf, line)) {
            if (line.empty()) continue;
            KeypointRecord rec = parse_keypoint_record(line);
            keypoints[rec.image_id] = rec.keypoints;
        }
    }

    const LimbSchema& schema = default_limb_schema();
    for (const auto& sj : manifest.at("samples")) {
        DataSample s;
        s.sample_id = sj.at("sample_id").get<std::string>();
        s.identity = sj.at("identity").get<int>();
        s.camera = sj.at("camera").get<int>();
        s.split = split_from_name(sj.at("split").get<std::string>());
        const auto it = keypoints.find(s.sample_id);
        if (it == keypoints.end())
            throw std::runtime_error("load_dataset: no keypoints for sample " + s.sample_id);
        s.keypoints = it->second;
        s.image = read_ppm((fs::path(dir) / "images" / (s.sample_id + ".ppm")).string());
        s.pose = rasterize_pose(s.keypoints, schema, out.data.h, out.data.w);
        out.data.samples.push_back(std::move(s));
    }

    if (manifest.contains("synthetic")) {
        const json& meta = manifest["synthetic"];
        out.has_meta = true;
        out.meta.domain = meta.at("domain").get<std::string>();
        for (const auto& c : meta.at("camera_colors")) out.meta.camera_colors.push_back(color_from_json(c));
        const json& g = meta.at("geometry");
        out.meta.geometry.limb_thickness = g.at("limb_thickness").get<double>();
        out.meta.geometry.torso_thickness = g.at("torso_thickness").get<double>();
        out.meta.geometry.head_radius = g.at("head_radius").get<double>();
        out.meta.geometry.bag_radius = g.at("bag_radius").get<double>();
        for (const auto& ij : meta.at("identities")) {
            StickIdentity ident;
            ident.id = ij.at("id").get<int>();
            ident.torso = color_from_json(ij.at("torso"));
            ident.legs = color_from_json(ij.at("legs"));
            ident.head = color_from_json(ij.at("head"));
            ident.arm_scale = ij.at("arm_scale").get<double>();
            ident.leg_scale = ij.at("leg_scale").get<double>();
            if (ij.contains("bag")) ident.bag = color_from_json(ij.at("bag"));
            out.meta.identities.push_back(ident);
        }
    }
    out.data.validate();
    return out;
}

}  // namespace posenorm
