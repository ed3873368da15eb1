#include "posenorm/pose_skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace posenorm {

const char* joint_name(int joint) {
    static const char* names[kNumJoints] = {
        "nose",       "neck",       "r_shoulder", "r_elbow", "r_wrist", "l_shoulder",
        "l_elbow",    "l_wrist",    "r_hip",      "r_knee",  "r_ankle", "l_hip",
        "l_knee",     "l_ankle",    "r_eye",      "l_eye",   "r_ear",   "l_ear"};
    if (joint < 0 || joint >= kNumJoints) throw std::out_of_range("joint_name: bad index");
    return names[joint];
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    const double i = std::floor(h * 6.0);
    const double f = h * 6.0 - i;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - f * s);
    const double t = v * (1.0 - (1.0 - f) * s);
    switch (static_cast<int>(i) % 6) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

const LimbSchema& default_limb_schema() {
    static const LimbSchema schema = [] {
        LimbSchema s;
        const std::array<std::pair<int, int>, 17> pairs = {{
            {kNeck, kRShoulder},
            {kNeck, kLShoulder},
            {kRShoulder, kRElbow},
            {kRElbow, kRWrist},
            {kLShoulder, kLElbow},
            {kLElbow, kLWrist},
            {kNeck, kRHip},
            {kRHip, kRKnee},
            {kRKnee, kRAnkle},
            {kNeck, kLHip},
            {kLHip, kLKnee},
            {kLKnee, kLAnkle},
            {kNeck, kNose},
            {kNose, kREye},
            {kREye, kREar},
            {kNose, kLEye},
            {kLEye, kLEar},
        }};
        for (size_t i = 0; i < pairs.size(); ++i) {
            Limb limb;
            limb.a = pairs[i].first;
            limb.b = pairs[i].second;
            limb.color = hsv_to_rgb(static_cast<double>(i) / pairs.size(), 1.0, 1.0);
            s.limbs.push_back(limb);
        }
        return s;
    }();
    return schema;
}

namespace {

[[noreturn]] void parse_fail(int joint, const std::string& what) {
    std::ostringstream os;
    os << "parse_keypoints: joint " << joint;
    if (joint >= 0 && joint < kNumJoints) os << " (" << joint_name(joint) << ")";
    os << ": " << what;
    throw std::invalid_argument(os.str());
}

double parse_coord(const std::string& tok, int joint, const char* field) {
    try {
        size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) parse_fail(joint, std::string("trailing characters in ") + field);
        return v;
    } catch (const std::invalid_argument&) {
        parse_fail(joint, std::string("unparsable ") + field + " '" + tok + "'");
    } catch (const std::out_of_range&) {
        parse_fail(joint, std::string("out-of-range ") + field + " '" + tok + "'");
    }
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

KeypointRecord parse_keypoint_record(const std::string& line) {
    const std::string text = trim(line);
    const auto sep = text.find_first_of(" \t");
    if (sep == std::string::npos)
        throw std::invalid_argument("parse_keypoints: record has no keypoint payload");
    KeypointRecord rec;
    rec.image_id = text.substr(0, sep);

    std::vector<std::string> triples;
    {
        std::string payload = text.substr(sep + 1);
        std::stringstream ss(payload);
        std::string item;
        while (std::getline(ss, item, ',')) triples.push_back(trim(item));
    }
    if (triples.size() != kNumJoints) {
        std::ostringstream os;
        os << "parse_keypoints: expected " << kNumJoints << " joints, got " << triples.size();
        throw std::invalid_argument(os.str());
    }

    for (int j = 0; j < kNumJoints; ++j) {
        const std::string& t = triples[static_cast<size_t>(j)];
        const auto c1 = t.find(':');
        const auto c2 = t.find(':', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            parse_fail(j, "malformed triple '" + t + "'");
        Keypoint kp;
        kp.x = parse_coord(t.substr(0, c1), j, "x");
        kp.y = parse_coord(t.substr(c1 + 1, c2 - c1 - 1), j, "y");
        const std::string v = trim(t.substr(c2 + 1));
        if (v == "1")
            kp.visible = true;
        else if (v == "0")
            kp.visible = false;
        else
            parse_fail(j, "visibility flag must be 0 or 1, got '" + v + "'");
        if (kp.visible && (!std::isfinite(kp.x) || !std::isfinite(kp.y)))
            parse_fail(j, "non-finite coordinate on a visible joint");
        if (kp.visible && (kp.x < 0.0 || kp.x > 1.0 || kp.y < 0.0 || kp.y > 1.0))
            kp.visible = false;  // out-of-frame joints are treated as unseen
        rec.keypoints.joints[static_cast<size_t>(j)] = kp;
    }
    return rec;
}

KeypointSet parse_keypoints(const std::string& line) {
    return parse_keypoint_record(line).keypoints;
}

std::string format_keypoint_record(const std::string& image_id, const KeypointSet& kp) {
    std::ostringstream os;
    os.precision(17);
    os << image_id << " ";
    for (int j = 0; j < kNumJoints; ++j) {
        const Keypoint& k = kp.joints[static_cast<size_t>(j)];
        if (j) os << ",";
        os << k.x << ":" << k.y << ":" << (k.visible ? 1 : 0);
    }
    return os.str();
}

void paint_segment(Image& img, double x0, double y0, double x1, double y1,
                   double thickness, const std::array<double, 3>& signed_color) {
    const double r = thickness * 0.5;
    const int xmin = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - r)));
    const int xmax = std::min(img.w - 1, static_cast<int>(std::ceil(std::max(x0, x1) + r)));
    const int ymin = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - r)));
    const int ymax = std::min(img.h - 1, static_cast<int>(std::ceil(std::max(y0, y1) + r)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (int y = ymin; y <= ymax; ++y) {
        for (int x = xmin; x <= xmax; ++x) {
            double t = 0.0;
            if (len2 > 0.0) t = std::clamp(((x - x0) * dx + (y - y0) * dy) / len2, 0.0, 1.0);
            const double px = x0 + t * dx, py = y0 + t * dy;
            const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
            if (d2 <= r * r) img.set_pixel(y, x, signed_color);
        }
    }
}

void paint_disc(Image& img, double cx, double cy, double radius,
                const std::array<double, 3>& signed_color) {
    if (radius <= 0.0) return;
    const int xmin = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int xmax = std::min(img.w - 1, static_cast<int>(std::ceil(cx + radius)));
    const int ymin = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int ymax = std::min(img.h - 1, static_cast<int>(std::ceil(cy + radius)));
    for (int y = ymin; y <= ymax; ++y)
        for (int x = xmin; x <= xmax; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if (d2 <= radius * radius) img.set_pixel(y, x, signed_color);
        }
}

PoseImage rasterize_pose(const KeypointSet& kp, const LimbSchema& schema, int h, int w) {
    if (w < 8 || h != 2 * w)
        throw std::invalid_argument("rasterize_pose: dims must satisfy h == 2*w with w >= 8");
    PoseImage img = Image::filled(h, w, {-1.0, -1.0, -1.0});
    for (const Limb& limb : schema.limbs) {
        const Keypoint& a = kp.joints[static_cast<size_t>(limb.a)];
        const Keypoint& b = kp.joints[static_cast<size_t>(limb.b)];
        if (!a.visible || !b.visible) continue;
        paint_segment(img, a.x * (w - 1), a.y * (h - 1), b.x * (w - 1), b.y * (h - 1),
                      schema.limb_thickness, to_signed(limb.color));
    }
    if (schema.joint_radius > 0.0) {
        for (const Keypoint& j : kp.joints) {
            if (!j.visible) continue;
            paint_disc(img, j.x * (w - 1), j.y * (h - 1), schema.joint_radius,
                       to_signed(schema.joint_color));
        }
    }
    return img;
}

}  // namespace posenorm
