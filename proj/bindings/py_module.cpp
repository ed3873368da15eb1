// Python bindings for the main operations: pose rasterization, pose
// clustering, the generator/discriminator, losses, feature extraction, and
// retrieval metrics. Images cross the boundary as (h, w, 3) float64 arrays in
// [-1, 1].
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "posenorm/gan_training.hpp"
#include "posenorm/pipeline.hpp"
#include "posenorm/retrieval_eval.hpp"
#include "posenorm/synth_data.hpp"

namespace py = pybind11;
using namespace posenorm;

namespace {

py::array_t<double> image_to_array(const Image& img) {
    py::array_t<double> arr({img.h, img.w, 3});
    auto r = arr.mutable_unchecked<3>();
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) r(y, x, c) = img.at(c, y, x);
    return arr;
}

Image array_to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3)
        throw std::invalid_argument("expected an (h, w, 3) array");
    Image img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    auto r = arr.unchecked<3>();
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = r(y, x, c);
    return img;
}

KeypointSet list_to_keypoints(const std::vector<std::tuple<double, double, bool>>& joints) {
    if (joints.size() != static_cast<size_t>(kNumJoints))
        throw std::invalid_argument("expected 18 (x, y, visible) joints");
    KeypointSet kp;
    for (int j = 0; j < kNumJoints; ++j) {
        kp.joints[static_cast<size_t>(j)] = {std::get<0>(joints[static_cast<size_t>(j)]),
                                             std::get<1>(joints[static_cast<size_t>(j)]),
                                             std::get<2>(joints[static_cast<size_t>(j)])};
    }
    return kp;
}

std::vector<std::tuple<double, double, bool>> keypoints_to_list(const KeypointSet& kp) {
    std::vector<std::tuple<double, double, bool>> out;
    for (const auto& j : kp.joints) out.emplace_back(j.x, j.y, j.visible);
    return out;
}

py::dict report_to_dict(const EvalReport& r) {
    py::dict d;
    d["cmc"] = r.cmc;
    d["map"] = r.map;
    d["per_query_ap"] = r.per_query_ap;
    d["n_queries"] = r.n_queries;
    d["n_excluded"] = r.n_excluded;
    d["n_gallery"] = r.n_gallery;
    return d;
}

}  // namespace

PYBIND11_MODULE(_posenorm, m) {
    m.doc() = "pose-normalized person re-identification: core operations";

    // ------------------------------------------------------ pose skeleton
    m.def("parse_keypoints", [](const std::string& line) {
        return keypoints_to_list(parse_keypoints(line));
    });
    m.def("format_keypoint_record",
          [](const std::string& id, const std::vector<std::tuple<double, double, bool>>& kp) {
              return format_keypoint_record(id, list_to_keypoints(kp));
          });
    m.def(
        "rasterize_pose",
        [](const std::vector<std::tuple<double, double, bool>>& kp, int h, int w) {
            return image_to_array(rasterize_pose(list_to_keypoints(kp), default_limb_schema(), h, w));
        },
        py::arg("keypoints"), py::arg("h") = 64, py::arg("w") = 32);

    // --------------------------------------------------- canonical poses
    m.def(
        "embed_pose",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img) {
            return embed_pose(array_to_image(img));
        },
        py::arg("pose_image"));
    m.def(
        "kmeans_fit",
        [](const std::vector<std::vector<double>>& points, int k, uint64_t seed, int max_iter) {
            const PoseClusterModel model = kmeans_fit(points, k, seed, max_iter);
            py::dict d;
            d["assignments"] = model.assignments;
            d["centroids"] = model.centroids;
            d["inertia"] = model.inertia;
            d["medoid_indices"] = model.medoid_indices;
            d["inertia_history"] = model.inertia_history;
            return d;
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 0, py::arg("max_iter") = 100);

    // --------------------------------------------------------- losses
    m.def(
        "adversarial_losses",
        [](double d_real, double d_fake, double lambda1, const std::string& mode) {
            GanLossConfig cfg;
            cfg.lambda1 = lambda1;
            cfg.mode = mode == "original" ? AdvMode::original : AdvMode::non_saturating;
            const AdvLosses l = adversarial_losses(d_real, d_fake, cfg);
            return py::make_tuple(l.l_gan, l.gen_adv_term, l.l_d);
        },
        py::arg("d_real"), py::arg("d_fake"), py::arg("lambda1") = 10.0,
        py::arg("mode") = "non_saturating");
    m.def(
        "generator_loss",
        [](double gen_adv, double l1, double lambda1) {
            GanLossConfig cfg;
            cfg.lambda1 = lambda1;
            return generator_loss(gen_adv, l1, cfg);
        },
        py::arg("gen_adv_term"), py::arg("l1"), py::arg("lambda1") = 10.0);
    m.def("l1_loss",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
              return l1_loss(array_to_image(a), array_to_image(b));
          });
    m.def("identity_ce_loss", &identity_ce_loss, py::arg("logits"), py::arg("label"));

    // -------------------------------------------------------- networks
    py::class_<ArchConfig>(m, "ArchConfig")
        .def(py::init<>())
        .def_readwrite("base_channels", &ArchConfig::base_channels)
        .def_readwrite("n_res_blocks", &ArchConfig::n_res_blocks)
        .def_readwrite("h", &ArchConfig::h)
        .def_readwrite("w", &ArchConfig::w)
        .def_readwrite("discriminator_layers", &ArchConfig::discriminator_layers);

    py::class_<GanNetworks>(m, "GanNetworks")
        .def("generator_forward",
             [](GanNetworks& nets, const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
                const py::array_t<double, py::array::c_style | py::array::forcecast>& pose) {
                 return image_to_array(
                     generator_forward(array_to_image(img), array_to_image(pose), nets.generator));
             })
        .def("discriminator_forward",
             [](GanNetworks& nets, const py::array_t<double, py::array::c_style | py::array::forcecast>& img) {
                 return discriminator_forward(array_to_image(img), nets.discriminator);
             });
    m.def("init_params", &init_params, py::arg("arch"), py::arg("seed"));

    // -------------------------------------------------------- retrieval
    m.def("fuse_max", &fuse_max, py::arg("vectors"));
    m.def("pairwise_euclidean", &pairwise_euclidean, py::arg("queries"), py::arg("gallery"));
    m.def("average_precision", &average_precision, py::arg("ranked_relevance"));
    m.def(
        "cmc_map",
        [](const std::vector<std::vector<double>>& dist, const std::vector<int>& ql,
           const std::vector<int>& qc, const std::vector<int>& gl, const std::vector<int>& gc,
           bool cross_camera_filter, int max_rank) {
            EvalProtocol proto;
            proto.cross_camera_filter = cross_camera_filter;
            return report_to_dict(cmc_map(dist, ql, qc, gl, gc, proto, max_rank));
        },
        py::arg("distmat"), py::arg("query_labels"), py::arg("query_cams"),
        py::arg("gallery_labels"), py::arg("gallery_cams"), py::arg("cross_camera_filter") = true,
        py::arg("max_rank") = 0);

    // ------------------------------------------------------- synthetic data
    m.def(
        "generate_dataset",
        [](int n_identities, int images_per_identity, int n_cameras, int h, int w, uint64_t seed,
           const std::string& domain) {
            SynthConfig cfg;
            cfg.n_identities = n_identities;
            cfg.images_per_identity = images_per_identity;
            cfg.n_cameras = n_cameras;
            cfg.h = h;
            cfg.w = w;
            cfg.seed = seed;
            cfg.domain = domain;
            const SynthDataset ds = generate_dataset(cfg);
            py::list samples;
            for (const auto& s : ds.data.samples) {
                py::dict d;
                d["image"] = image_to_array(s.image);
                d["pose_image"] = image_to_array(s.pose);
                d["keypoints"] = keypoints_to_list(s.keypoints);
                d["identity"] = s.identity;
                d["camera"] = s.camera;
                d["sample_id"] = s.sample_id;
                d["split"] = split_name(s.split);
                samples.append(d);
            }
            return samples;
        },
        py::arg("n_identities") = 4, py::arg("images_per_identity") = 4, py::arg("n_cameras") = 2,
        py::arg("h") = 64, py::arg("w") = 32, py::arg("seed") = 1, py::arg("domain") = "a");
}
