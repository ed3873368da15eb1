#include "posenorm/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace posenorm {

// ----------------------------------------------------------------- config

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ValidationError("config: unknown key '" + item.key() + "' in " + where);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config: bad value for '") + key + "'");
    }
}

SynthConfig parse_synth(const json& j) {
    check_keys(j, {"n_identities", "images_per_identity", "n_cameras", "h", "w", "domain",
                   "pose_jitter_deg", "geometry"},
               "dataset.synth");
    SynthConfig cfg;
    cfg.n_identities = get_or(j, "n_identities", cfg.n_identities);
    cfg.images_per_identity = get_or(j, "images_per_identity", cfg.images_per_identity);
    cfg.n_cameras = get_or(j, "n_cameras", cfg.n_cameras);
    cfg.h = get_or(j, "h", cfg.h);
    cfg.w = get_or(j, "w", cfg.w);
    cfg.domain = get_or<std::string>(j, "domain", cfg.domain);
    cfg.pose_jitter_deg = get_or(j, "pose_jitter_deg", cfg.pose_jitter_deg);
    if (j.contains("geometry")) {
        const json& g = j.at("geometry");
        check_keys(g, {"limb_thickness", "torso_thickness", "head_radius", "bag_radius"},
                   "dataset.synth.geometry");
        cfg.geometry.limb_thickness = get_or(g, "limb_thickness", cfg.geometry.limb_thickness);
        cfg.geometry.torso_thickness = get_or(g, "torso_thickness", cfg.geometry.torso_thickness);
        cfg.geometry.head_radius = get_or(g, "head_radius", cfg.geometry.head_radius);
        cfg.geometry.bag_radius = get_or(g, "bag_radius", cfg.geometry.bag_radius);
    }
    return cfg;
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(j, {"seed", "out_dir", "dataset", "gan", "cluster", "reid", "eval"}, "top level");

    PipelineConfig cfg;
    cfg.seed = get_or<uint64_t>(j, "seed", cfg.seed);
    cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir);

    if (!j.contains("dataset")) throw ValidationError("config: missing 'dataset' section");
    const json& ds = j.at("dataset");
    check_keys(ds, {"synth", "path"}, "dataset");
    if (ds.contains("synth") == ds.contains("path"))
        throw ValidationError("config: dataset needs exactly one of 'synth' or 'path'");
    if (ds.contains("synth"))
        cfg.synth = parse_synth(ds.at("synth"));
    else
        cfg.dataset_path = ds.at("path").get<std::string>();

    if (j.contains("gan")) {
        const json& g = j.at("gan");
        check_keys(g, {"arch", "lambda1", "adv_mode", "learning_rate", "beta1", "batch_size",
                       "steps", "include_self_pairs", "checkpoint_every"},
                   "gan");
        if (g.contains("arch")) {
            const json& a = g.at("arch");
            check_keys(a, {"base_channels", "n_res_blocks", "discriminator_layers"}, "gan.arch");
            cfg.gan_arch.base_channels = get_or(a, "base_channels", cfg.gan_arch.base_channels);
            cfg.gan_arch.n_res_blocks = get_or(a, "n_res_blocks", cfg.gan_arch.n_res_blocks);
            cfg.gan_arch.discriminator_layers =
                get_or(a, "discriminator_layers", cfg.gan_arch.discriminator_layers);
        }
        cfg.gan_loss.lambda1 = get_or(g, "lambda1", cfg.gan_loss.lambda1);
        const std::string mode = get_or<std::string>(
            g, "adv_mode", cfg.gan_loss.mode == AdvMode::original ? "original" : "non_saturating");
        if (mode == "original")
            cfg.gan_loss.mode = AdvMode::original;
        else if (mode == "non_saturating")
            cfg.gan_loss.mode = AdvMode::non_saturating;
        else
            throw ValidationError("config: gan.adv_mode must be 'original' or 'non_saturating'");
        cfg.gan_train.learning_rate = get_or(g, "learning_rate", cfg.gan_train.learning_rate);
        cfg.gan_train.beta1 = get_or(g, "beta1", cfg.gan_train.beta1);
        cfg.gan_train.batch_size = get_or(g, "batch_size", cfg.gan_train.batch_size);
        cfg.gan_train.steps = get_or(g, "steps", cfg.gan_train.steps);
        cfg.gan_train.include_self_pairs =
            get_or(g, "include_self_pairs", cfg.gan_train.include_self_pairs);
        cfg.gan_checkpoint_every = get_or(g, "checkpoint_every", cfg.gan_checkpoint_every);
    }

    if (j.contains("cluster")) {
        const json& c = j.at("cluster");
        check_keys(c, {"k", "max_iter", "embedder", "emit_projection_csv"}, "cluster");
        cfg.n_canonical = get_or(c, "k", cfg.n_canonical);
        cfg.kmeans_max_iter = get_or(c, "max_iter", cfg.kmeans_max_iter);
        if (c.contains("embedder")) {
            const json& e = c.at("embedder");
            check_keys(e, {"out_h", "out_w", "normalize"}, "cluster.embedder");
            cfg.embedder.out_h = get_or(e, "out_h", cfg.embedder.out_h);
            cfg.embedder.out_w = get_or(e, "out_w", cfg.embedder.out_w);
            cfg.embedder.normalize = get_or(e, "normalize", cfg.embedder.normalize);
        }
        cfg.emit_projection_csv = get_or(c, "emit_projection_csv", cfg.emit_projection_csv);
    }

    if (j.contains("reid")) {
        const json& r = j.at("reid");
        check_keys(r, {"base_channels", "feature_dim", "taps", "learning_rate", "beta1",
                       "batch_size", "dropout", "epochs", "b_sees_originals"},
                   "reid");
        cfg.reid_arch.base_channels = get_or(r, "base_channels", cfg.reid_arch.base_channels);
        cfg.reid_arch.feature_dim = get_or(r, "feature_dim", cfg.reid_arch.feature_dim);
        if (r.contains("taps")) cfg.taps.tap_stages = r.at("taps").get<std::vector<int>>();
        cfg.reid_train.learning_rate = get_or(r, "learning_rate", cfg.reid_train.learning_rate);
        cfg.reid_train.beta1 = get_or(r, "beta1", cfg.reid_train.beta1);
        cfg.reid_train.batch_size = get_or(r, "batch_size", cfg.reid_train.batch_size);
        cfg.reid_train.dropout = get_or(r, "dropout", cfg.reid_train.dropout);
        cfg.reid_train.epochs = get_or(r, "epochs", cfg.reid_train.epochs);
        cfg.b_sees_originals = get_or(r, "b_sees_originals", cfg.b_sees_originals);
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_keys(e, {"cross_camera_filter", "multi_query", "use_pose_branch", "n_poses",
                       "max_rank"},
                   "eval");
        cfg.protocol.cross_camera_filter =
            get_or(e, "cross_camera_filter", cfg.protocol.cross_camera_filter);
        cfg.protocol.multi_query = get_or(e, "multi_query", cfg.protocol.multi_query);
        cfg.eval_options.use_pose_branch =
            get_or(e, "use_pose_branch", cfg.eval_options.use_pose_branch);
        cfg.eval_options.n_poses = get_or(e, "n_poses", cfg.eval_options.n_poses);
        cfg.eval_options.max_rank = get_or(e, "max_rank", cfg.eval_options.max_rank);
    }

    cfg.validate();
    return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

void PipelineConfig::validate() const {
    if (out_dir.empty()) throw ValidationError("config: out_dir must not be empty");
    if (!synth && dataset_path.empty())
        throw ValidationError("config: dataset must specify 'synth' or 'path'");
    if (gan_train.learning_rate <= 0 || gan_train.batch_size < 1 || gan_train.steps < 0)
        throw ValidationError("config: invalid gan training settings");
    if (gan_loss.lambda1 < 0) throw ValidationError("config: gan.lambda1 must be >= 0");
    if (reid_train.dropout < 0 || reid_train.dropout >= 1)
        throw ValidationError("config: reid.dropout must lie in [0,1)");
    if (reid_train.epochs < 0) throw ValidationError("config: reid.epochs must be >= 0");
    if (n_canonical < 1) throw ValidationError("config: cluster.k must be >= 1");
    if (eval_options.n_poses < 1 || eval_options.n_poses > n_canonical)
        throw ValidationError("config: eval.n_poses must lie in [1, cluster.k]");
}

std::string PipelineConfig::canonical_dump() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    if (synth) {
        j["dataset"]["synth"] = {{"n_identities", synth->n_identities},
                                 {"images_per_identity", synth->images_per_identity},
                                 {"n_cameras", synth->n_cameras},
                                 {"h", synth->h},
                                 {"w", synth->w},
                                 {"domain", synth->domain},
                                 {"pose_jitter_deg", synth->pose_jitter_deg},
                                 {"geometry",
                                  {{"limb_thickness", synth->geometry.limb_thickness},
                                   {"torso_thickness", synth->geometry.torso_thickness},
                                   {"head_radius", synth->geometry.head_radius},
                                   {"bag_radius", synth->geometry.bag_radius}}}};
    } else {
        j["dataset"]["path"] = dataset_path;
    }
    j["gan"] = {{"arch",
                 {{"base_channels", gan_arch.base_channels},
                  {"n_res_blocks", gan_arch.n_res_blocks},
                  {"discriminator_layers", gan_arch.discriminator_layers}}},
                {"lambda1", gan_loss.lambda1},
                {"adv_mode", gan_loss.mode == AdvMode::original ? "original" : "non_saturating"},
                {"learning_rate", gan_train.learning_rate},
                {"beta1", gan_train.beta1},
                {"batch_size", gan_train.batch_size},
                {"steps", gan_train.steps},
                {"include_self_pairs", gan_train.include_self_pairs},
                {"checkpoint_every", gan_checkpoint_every}};
    j["cluster"] = {{"k", n_canonical},
                    {"max_iter", kmeans_max_iter},
                    {"embedder",
                     {{"out_h", embedder.out_h},
                      {"out_w", embedder.out_w},
                      {"normalize", embedder.normalize}}},
                    {"emit_projection_csv", emit_projection_csv}};
    j["reid"] = {{"base_channels", reid_arch.base_channels},
                 {"feature_dim", reid_arch.feature_dim},
                 {"taps", taps.tap_stages},
                 {"learning_rate", reid_train.learning_rate},
                 {"beta1", reid_train.beta1},
                 {"batch_size", reid_train.batch_size},
                 {"dropout", reid_train.dropout},
                 {"epochs", reid_train.epochs},
                 {"b_sees_originals", b_sees_originals}};
    j["eval"] = {{"cross_camera_filter", protocol.cross_camera_filter},
                 {"multi_query", protocol.multi_query},
                 {"use_pose_branch", eval_options.use_pose_branch},
                 {"n_poses", eval_options.n_poses},
                 {"max_rank", eval_options.max_rank}};
    return j.dump(2);
}

uint64_t PipelineConfig::hash() const { return fnv1a(canonical_dump()); }

// ------------------------------------------------------------- checkpoint

namespace {

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
int64_t read_i64(std::istream& is) {
    int64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
std::string read_str(std::istream& is) {
    const uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

constexpr char kCkptMagic[8] = {'P', 'N', 'C', 'K', 'P', 'T', '0', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(kCkptMagic, 8);
    write_u32(os, ckpt.version);
    write_str(os, ckpt.stage);
    write_u64(os, ckpt.config_hash);
    write_i64(os, ckpt.step);
    write_str(os, ckpt.rng_state);
    write_u32(os, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        write_str(os, name);
        write_u32(os, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) write_u32(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("checkpoint not found: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    Checkpoint ckpt;
    ckpt.version = read_u32(is);
    if (ckpt.version != 1)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(ckpt.version) + " in " + path);
    ckpt.stage = read_str(is);
    ckpt.config_hash = read_u64(is);
    ckpt.step = read_i64(is);
    ckpt.rng_state = read_str(is);
    const uint32_t n = read_u32(is);
    if (!is) throw std::runtime_error("load_checkpoint: truncated header in " + path);
    for (uint32_t i = 0; i < n; ++i) {
        const std::string name = read_str(is);
        const uint32_t ndim = read_u32(is);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(read_u32(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!is) throw std::runtime_error("load_checkpoint: truncated tensor '" + name + "' in " + path);
        ckpt.tensors.emplace_back(name, std::move(t));
    }
    return ckpt;
}

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void append_params(Checkpoint& ckpt, const std::string& prefix, std::vector<NamedParam> params) {
    for (const auto& p : params) ckpt.tensors.emplace_back(prefix + p.name, *p.value);
}

void apply_checkpoint(const Checkpoint& ckpt, const std::string& prefix,
                      std::vector<NamedParam> params) {
    for (auto& p : params) {
        const Tensor* t = ckpt.find(prefix + p.name);
        if (!t)
            throw std::runtime_error("checkpoint: missing tensor '" + prefix + p.name + "'");
        if (t->shape != p.value->shape)
            throw std::runtime_error("checkpoint: shape mismatch for tensor '" + prefix + p.name +
                                     "': file has " + t->shape_str() + ", model expects " +
                                     p.value->shape_str());
        p.value->data = t->data;
    }
}

// --------------------------------------------------------------- run dirs

RunPaths RunPaths::at(const fs::path& root) {
    RunPaths p;
    p.root = root;
    p.dataset = root / "dataset";
    p.checkpoints = root / "checkpoints";
    p.canonical = root / "canonical_poses";
    p.synth = root / "synth";
    p.metrics = root / "metrics";
    p.losses = root / "losses";
    p.grids = root / "images" / "grids";
    p.stages = root / "stages";
    return p;
}

void RunPaths::create_all() const {
    for (const auto& d : {root, checkpoints, canonical, synth, metrics, losses, grids, stages})
        fs::create_directories(d);
}

// ---------------------------------------------------------------- manifest

namespace {

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, bool force)
    : cfg_(std::move(cfg)), paths_(RunPaths::at(cfg_.out_dir)), force_(force) {
    cfg_.validate();
    paths_.create_all();

    const fs::path lock_path = paths_.root / ".lock";
    lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (lock_fd_ < 0)
        throw ValidationError("run directory " + paths_.root.string() +
                              " is locked by another process (" + lock_path.string() + ")");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const ssize_t written = ::write(lock_fd_, pid.data(), pid.size());

    const fs::path lock_cfg = paths_.root / "config.lock.json";
    const std::string dump = cfg_.canonical_dump();
    if (fs::exists(lock_cfg)) {
        std::ifstream in(lock_cfg);
        std::stringstream ss;
        ss << in.rdbuf();
        if (ss.str() != dump)
            throw ValidationError("run directory " + paths_.root.string() +
                                  " was created with a different configuration; use a fresh "
                                  "out_dir or delete it");
    } else {
        std::ofstream out(lock_cfg);
        out << dump;
    }
}

Pipeline::~Pipeline() {
    if (lock_fd_ >= 0) {
        ::close(lock_fd_);
        std::error_code ec;
        fs::remove(paths_.root / ".lock", ec);
    }
}

bool Pipeline::stage_done(const std::string& stage) const {
    const fs::path marker = paths_.stages / (stage + ".json");
    if (!fs::exists(marker)) return false;
    std::ifstream in(marker);
    json j;
    try {
        in >> j;
    } catch (const json::exception&) {
        return false;
    }
    return j.value("config_hash", "") == hash_hex(cfg_.hash());
}

void Pipeline::mark_done(const std::string& stage) {
    std::ofstream out(paths_.stages / (stage + ".json"));
    out << json{{"config_hash", hash_hex(cfg_.hash())}, {"seed", cfg_.seed}}.dump(2) << "\n";
}

bool Pipeline::skip_if_done(const std::string& stage) {
    if (!force_ && stage_done(stage)) {
        std::fprintf(stderr, "[posenorm] %s: already complete, skipping (use --force to redo)\n",
                     stage.c_str());
        return true;
    }
    return false;
}

void Pipeline::append_manifest(const std::string& stage, double duration_s,
                               const std::vector<std::string>& outputs,
                               const std::map<std::string, double>& summary) {
    const fs::path path = paths_.root / "manifest.json";
    json manifest;
    if (fs::exists(path)) {
        std::ifstream in(path);
        try {
            in >> manifest;
        } catch (const json::exception&) {
            manifest = json::object();
        }
    }
    if (!manifest.contains("entries")) manifest["entries"] = json::array();
    json entry = {{"stage", stage},
                  {"seed", cfg_.seed},
                  {"config_hash", hash_hex(cfg_.hash())},
                  {"duration_s", duration_s},
                  {"outputs", outputs}};
    if (!summary.empty()) entry["summary"] = summary;
    manifest["entries"].push_back(entry);
    std::ofstream out(path);
    out << manifest.dump(2) << "\n";
}

SynthDataset& Pipeline::dataset() {
    if (dataset_) return *dataset_;
    if (cfg_.synth) {
        if (!fs::exists(paths_.dataset / "manifest.json"))
            throw ValidationError("dataset not generated yet; run synth-data first (expected " +
                                  (paths_.dataset / "manifest.json").string() + ")");
        dataset_ = load_dataset(paths_.dataset.string());
    } else {
        if (!fs::exists(fs::path(cfg_.dataset_path) / "manifest.json"))
            throw ValidationError("dataset path has no manifest.json: " + cfg_.dataset_path);
        dataset_ = load_dataset(cfg_.dataset_path);
    }
    return *dataset_;
}

// ------------------------------------------------------------------ stages

namespace {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

void Pipeline::synth_data() {
    if (!cfg_.synth) {
        std::fprintf(stderr, "[posenorm] synth-data: dataset.path given, nothing to generate\n");
        return;
    }
    if (skip_if_done("synth-data")) return;
    Stopwatch timer;
    SynthConfig scfg = *cfg_.synth;
    scfg.seed = derive_seed(cfg_.seed, "synth");
    SynthDataset ds = generate_dataset(scfg);
    write_dataset(paths_.dataset.string(), ds);
    dataset_ = std::move(ds);
    append_manifest("synth-data", timer.seconds(), {paths_.dataset.string()},
                    {{"n_samples", static_cast<double>(dataset_->data.samples.size())}});
    mark_done("synth-data");
}

void Pipeline::cluster_poses() {
    if (skip_if_done("cluster-poses")) return;
    Stopwatch timer;
    SynthDataset& ds = dataset();
    std::vector<PoseImage> poses;
    std::vector<std::string> ids;
    for (int i : ds.data.indices_of(Split::train)) {
        poses.push_back(ds.data.samples[static_cast<size_t>(i)].pose);
        ids.push_back(ds.data.samples[static_cast<size_t>(i)].sample_id);
    }
    const CanonicalPoseSet canon =
        select_canonical_poses(poses, ids, cfg_.n_canonical, derive_seed(cfg_.seed, "cluster"),
                               cfg_.embedder, cfg_.kmeans_max_iter);

    std::vector<std::string> outputs;
    for (int c = 0; c < cfg_.n_canonical; ++c) {
        const std::string path =
            (paths_.canonical / ("pose_" + std::to_string(c) + ".ppm")).string();
        write_ppm(path, canon.poses[static_cast<size_t>(c)]);
        outputs.push_back(path);
    }
    json manifest = {{"k", cfg_.n_canonical},
                     {"inertia", canon.model.inertia},
                     {"iterations", canon.model.inertia_history.size()},
                     {"cluster_sizes", canon.model.cluster_sizes},
                     {"medoid_sample_ids", canon.source_sample_ids}};
    {
        std::ofstream out(paths_.canonical / "manifest.json");
        out << manifest.dump(2) << "\n";
        outputs.push_back((paths_.canonical / "manifest.json").string());
    }
    if (cfg_.emit_projection_csv) {
        std::vector<std::vector<double>> emb;
        for (const auto& p : poses) emb.push_back(embed_pose(p, cfg_.embedder));
        const auto proj = principal_axes_projection(emb);
        std::ofstream csv(paths_.canonical / "embeddings_2d.csv");
        csv << "sample_id,x,y,cluster\n";
        csv.precision(17);
        for (size_t i = 0; i < proj.size(); ++i)
            csv << ids[i] << "," << proj[i][0] << "," << proj[i][1] << ","
                << canon.model.assignments[i] << "\n";
        outputs.push_back((paths_.canonical / "embeddings_2d.csv").string());
    }
    append_manifest("cluster-poses", timer.seconds(), outputs,
                    {{"inertia", canon.model.inertia}});
    mark_done("cluster-poses");
}

CanonicalPoseSet Pipeline::load_canonical(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw ValidationError("canonical poses not found: " + manifest_path.string() +
                              " (run cluster-poses first)");
    std::ifstream in(manifest_path);
    json j;
    in >> j;
    CanonicalPoseSet canon;
    const int k = j.at("k").get<int>();
    for (int c = 0; c < k; ++c)
        canon.poses.push_back(read_ppm((dir / ("pose_" + std::to_string(c) + ".ppm")).string()));
    canon.source_sample_ids = j.at("medoid_sample_ids").get<std::vector<std::string>>();
    return canon;
}

void Pipeline::train_gan() {
    if (skip_if_done("train-gan")) return;
    Stopwatch timer;
    SynthDataset& ds = dataset();
    ArchConfig arch = cfg_.gan_arch;
    arch.h = ds.data.h;
    arch.w = ds.data.w;
    GanNetworks nets = init_params(arch, derive_seed(cfg_.seed, "gan-init"));

    GanTrainConfig tcfg = cfg_.gan_train;
    tcfg.seed = derive_seed(cfg_.seed, "gan-train");

    const TrainView view = TrainView::from_split(ds.data, Split::train);
    std::ofstream csv(paths_.losses / "gan.csv");
    csv << "step,l_d,gen_adv,l1,l_g\n";
    csv.precision(17);

    Rng ckpt_rng(tcfg.seed);
    auto save_gan = [&](const std::string& name, int64_t step) {
        Checkpoint ckpt;
        ckpt.stage = "train-gan";
        ckpt.config_hash = cfg_.hash();
        ckpt.step = step;
        ckpt.rng_state = ckpt_rng.serialize();
        append_params(ckpt, "gen.", nets.generator.named_params());
        append_params(ckpt, "disc.", nets.discriminator.named_params());
        save_checkpoint((paths_.checkpoints / name).string(), ckpt);
    };

    train_pose_gan(view, nets.generator, nets.discriminator, tcfg, cfg_.gan_loss,
                   [&](int64_t step, const StepMetrics& m) {
                       csv << m.step << "," << m.l_d << "," << m.gen_adv << "," << m.l1 << ","
                           << m.l_g << "\n";
                       if (cfg_.gan_checkpoint_every > 0 &&
                           (step + 1) % cfg_.gan_checkpoint_every == 0 &&
                           step + 1 < tcfg.steps)
                           save_gan("gan_step" + std::to_string(step + 1) + ".ckpt", step + 1);
                   });
    save_gan("gan.ckpt", tcfg.steps);

    const double held_in_l1 =
        tcfg.steps > 0 ? mean_pair_l1(view, nets.generator, tcfg.include_self_pairs) : -1.0;
    append_manifest("train-gan", timer.seconds(),
                    {(paths_.checkpoints / "gan.ckpt").string(),
                     (paths_.losses / "gan.csv").string()},
                    {{"steps", static_cast<double>(tcfg.steps)}, {"held_in_l1", held_in_l1}});
    mark_done("train-gan");
}

void Pipeline::gen_normalized() {
    if (skip_if_done("gen-normalized")) return;
    Stopwatch timer;
    SynthDataset& ds = dataset();
    ArchConfig arch = cfg_.gan_arch;
    arch.h = ds.data.h;
    arch.w = ds.data.w;
    Generator gen(arch);
    {
        const Checkpoint ckpt = load_checkpoint((paths_.checkpoints / "gan.ckpt").string());
        apply_checkpoint(ckpt, "gen.", gen.named_params());
    }
    const CanonicalPoseSet canon = load_canonical(paths_.canonical);

    const std::vector<int> train_idx = ds.data.indices_of(Split::train);
    int grids_written = 0;
    for (int idx : train_idx) {
        const auto& sample = ds.data.samples[static_cast<size_t>(idx)];
        const std::vector<PersonImage> synth = synthesize_normalized(sample.image, canon, gen);
        for (size_t c = 0; c < synth.size(); ++c)
            write_ppm((paths_.synth / (sample.sample_id + "_p" + std::to_string(c) + ".ppm"))
                          .string(),
                      synth[c]);
        // Source | target pose | generated triptych rows, a few samples only.
        if (grids_written < 8) {
            const int k = static_cast<int>(synth.size());
            Image grid(ds.data.h * k, ds.data.w * 3);
            for (int c = 0; c < k; ++c) {
                auto blit = [&](const Image& tile, int col) {
                    for (int ch = 0; ch < 3; ++ch)
                        for (int y = 0; y < tile.h; ++y)
                            for (int x = 0; x < tile.w; ++x)
                                grid.at(ch, c * ds.data.h + y, col * ds.data.w + x) =
                                    tile.at(ch, y, x);
                };
                blit(sample.image, 0);
                blit(canon.poses[static_cast<size_t>(c)], 1);
                blit(synth[static_cast<size_t>(c)], 2);
            }
            write_ppm((paths_.grids / (sample.sample_id + ".ppm")).string(), grid);
            ++grids_written;
        }
    }
    append_manifest("gen-normalized", timer.seconds(), {paths_.synth.string()},
                    {{"n_sources", static_cast<double>(train_idx.size())}});
    mark_done("gen-normalized");
}

void Pipeline::train_reid() {
    if (skip_if_done("train-reid")) return;
    Stopwatch timer;
    SynthDataset& ds = dataset();
    ArchConfig garch = cfg_.gan_arch;
    garch.h = ds.data.h;
    garch.w = ds.data.w;
    Generator gen(garch);
    apply_checkpoint(load_checkpoint((paths_.checkpoints / "gan.ckpt").string()), "gen.",
                     gen.named_params());
    const CanonicalPoseSet canon = load_canonical(paths_.canonical);

    BackboneArch barch = cfg_.reid_arch;
    barch.h = ds.data.h;
    barch.w = ds.data.w;

    const TrainView view = TrainView::from_split(ds.data, Split::train);
    std::vector<const Image*> images;
    std::vector<int> labels;
    for (const auto& members : view.by_identity)
        for (int idx : members) {
            images.push_back(&ds.data.samples[static_cast<size_t>(idx)].image);
            labels.push_back(ds.data.samples[static_cast<size_t>(idx)].identity);
        }

    Backbone a(barch, cfg_.taps, ds.data.n_identities);
    {
        Rng rng(derive_seed(cfg_.seed, "reid-a-init"));
        a.init(rng);
    }
    ReidTrainConfig acfg = cfg_.reid_train;
    acfg.seed = derive_seed(cfg_.seed, "reid-a");
    const ReidTrainResult ra = train_identity_classifier(a, images, labels, acfg);

    Backbone b(barch, cfg_.taps, ds.data.n_identities);
    {
        Rng rng(derive_seed(cfg_.seed, "reid-b-init"));
        b.init(rng);
    }
    ReidTrainConfig bcfg = cfg_.reid_train;
    bcfg.seed = derive_seed(cfg_.seed, "reid-b");
    const ReidTrainResult rb =
        train_backbone_b(b, view, gen, canon, bcfg, cfg_.b_sees_originals);

    auto dump_history = [&](const std::string& name, const ReidTrainResult& r) {
        std::ofstream csv(paths_.losses / name);
        csv << "epoch,loss,accuracy\n";
        csv.precision(17);
        for (size_t e = 0; e < r.accuracy_history.size(); ++e)
            csv << e << "," << r.loss_history[e] << "," << r.accuracy_history[e] << "\n";
    };
    dump_history("reid_a.csv", ra);
    dump_history("reid_b.csv", rb);

    Checkpoint ckpt;
    ckpt.stage = "train-reid";
    ckpt.config_hash = cfg_.hash();
    ckpt.step = cfg_.reid_train.epochs;
    ckpt.rng_state = Rng(acfg.seed).serialize();
    append_params(ckpt, "a.", a.named_params());
    append_params(ckpt, "b.", b.named_params());
    save_checkpoint((paths_.checkpoints / "reid.ckpt").string(), ckpt);

    append_manifest(
        "train-reid", timer.seconds(),
        {(paths_.checkpoints / "reid.ckpt").string()},
        {{"acc_a", ra.accuracy_history.empty() ? -1.0 : ra.accuracy_history.back()},
         {"acc_b", rb.accuracy_history.empty() ? -1.0 : rb.accuracy_history.back()}});
    mark_done("train-reid");
}

EvalReport Pipeline::eval(const std::string& models_from) {
    Stopwatch timer;
    SynthDataset& ds = dataset();
    const fs::path models_dir = models_from.empty() ? paths_.root : fs::path(models_from);
    const fs::path gan_ckpt_path = models_dir / "checkpoints" / "gan.ckpt";
    const fs::path reid_ckpt_path = models_dir / "checkpoints" / "reid.ckpt";
    if (!fs::exists(gan_ckpt_path))
        throw ValidationError("eval: checkpoint not found: " + gan_ckpt_path.string());
    if (!fs::exists(reid_ckpt_path))
        throw ValidationError("eval: checkpoint not found: " + reid_ckpt_path.string());

    ArchConfig garch = cfg_.gan_arch;
    garch.h = ds.data.h;
    garch.w = ds.data.w;
    Generator gen(garch);
    apply_checkpoint(load_checkpoint(gan_ckpt_path.string()), "gen.", gen.named_params());

    const Checkpoint reid_ckpt = load_checkpoint(reid_ckpt_path.string());
    const Tensor* head = reid_ckpt.find("a.head.w");
    if (!head) throw std::runtime_error("eval: reid checkpoint lacks tensor a.head.w");
    const int model_identities = head->dim(0);

    BackboneArch barch = cfg_.reid_arch;
    barch.h = ds.data.h;
    barch.w = ds.data.w;
    Backbone a(barch, cfg_.taps, model_identities);
    Backbone b(barch, cfg_.taps, model_identities);
    apply_checkpoint(reid_ckpt, "a.", a.named_params());
    apply_checkpoint(reid_ckpt, "b.", b.named_params());

    const CanonicalPoseSet canon = load_canonical(models_dir / "canonical_poses");

    const EvalReport report = evaluate_pipeline(ds.data, a, &b, &gen, &canon, cfg_.protocol,
                                                cfg_.eval_options);

    json rj;
    rj["protocol"] = {{"cross_camera_filter", report.protocol.cross_camera_filter},
                      {"multi_query", report.protocol.multi_query}};
    rj["options"] = {{"use_pose_branch", cfg_.eval_options.use_pose_branch},
                     {"n_poses", cfg_.eval_options.n_poses}};
    rj["ranks"] = json::array();
    for (size_t r = 0; r < report.cmc.size(); ++r)
        rj["ranks"].push_back({{"k", r + 1}, {"acc", report.cmc[r]}});
    rj["map"] = report.map;
    rj["n_queries"] = report.n_queries;
    rj["n_excluded"] = report.n_excluded;
    rj["n_gallery"] = report.n_gallery;
    rj["per_query_ap"] = report.per_query_ap;
    {
        std::ofstream out(paths_.metrics / "eval.json");
        out << rj.dump(2) << "\n";
    }
    {
        std::ofstream csv(paths_.metrics / "cmc.csv");
        csv << "rank,accuracy\n";
        csv.precision(17);
        for (size_t r = 0; r < report.cmc.size(); ++r) csv << (r + 1) << "," << report.cmc[r] << "\n";
    }
    append_manifest("eval", timer.seconds(),
                    {(paths_.metrics / "eval.json").string(),
                     (paths_.metrics / "cmc.csv").string()},
                    {{"map", report.map},
                     {"rank1", report.cmc.empty() ? 0.0 : report.cmc[0]},
                     {"models_from", models_from.empty() ? 0.0 : 1.0}});
    return report;
}

std::string Pipeline::report() {
    std::ostringstream os;
    os << "posenorm run: " << paths_.root.string() << "\n";
    os << "config hash: " << hash_hex(cfg_.hash()) << ", seed " << cfg_.seed << "\n";

    if (fs::exists(paths_.root / "manifest.json")) {
        std::ifstream in(paths_.root / "manifest.json");
        json manifest;
        in >> manifest;
        for (const auto& e : manifest.value("entries", json::array())) {
            os << "- stage " << e.value("stage", "?") << " (" << e.value("duration_s", 0.0)
               << " s)";
            if (e.contains("summary"))
                for (const auto& item : e["summary"].items())
                    os << " " << item.key() << "=" << item.value().dump();
            os << "\n";
        }
    }
    if (fs::exists(paths_.metrics / "eval.json")) {
        std::ifstream in(paths_.metrics / "eval.json");
        json ev;
        in >> ev;
        os << "eval: mAP=" << ev.value("map", 0.0);
        const auto& ranks = ev.value("ranks", json::array());
        for (size_t k : {size_t(0), size_t(4), size_t(9)})
            if (k < ranks.size())
                os << " rank-" << (k + 1) << "=" << ranks[k].value("acc", 0.0);
        os << " (queries=" << ev.value("n_queries", 0)
           << ", excluded=" << ev.value("n_excluded", 0) << ")\n";
    }
    const std::string text = os.str();
    std::ofstream out(paths_.metrics / "report.txt");
    out << text;
    return text;
}

void Pipeline::run_all() {
    synth_data();
    cluster_poses();
    train_gan();
    gen_normalized();
    train_reid();
    eval();
    report();
}

// -------------------------------------------------------------------- CLI

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_dir_override;
    std::string models_from;
    int64_t seed_override = -1;
    bool force = false;
};

PipelineConfig make_config(const CliArgs& args) {
    PipelineConfig cfg = PipelineConfig::from_file(args.config_path);
    if (args.seed_override >= 0) cfg.seed = static_cast<uint64_t>(args.seed_override);
    if (!args.out_dir_override.empty()) cfg.out_dir = args.out_dir_override;
    cfg.validate();
    return cfg;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"pose-normalized person re-identification pipeline"};
    app.require_subcommand(1);

    CliArgs args;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "pipeline config JSON")->required();
        cmd->add_option("--seed", args.seed_override, "override the config seed");
        cmd->add_option("--out-dir", args.out_dir_override, "override the run directory");
        cmd->add_flag("--force", args.force, "redo completed stages");
        return cmd;
    };

    CLI::App* c_synth = add_common(app.add_subcommand("synth-data", "generate the dataset"));
    CLI::App* c_cluster =
        add_common(app.add_subcommand("cluster-poses", "cluster poses, pick canonical set"));
    CLI::App* c_gan = add_common(app.add_subcommand("train-gan", "train the pose generator"));
    CLI::App* c_gen =
        add_common(app.add_subcommand("gen-normalized", "synthesize canonical-pose images"));
    CLI::App* c_reid = add_common(app.add_subcommand("train-reid", "train both backbones"));
    CLI::App* c_eval = add_common(app.add_subcommand("eval", "retrieval evaluation"));
    c_eval->add_option("--models-from", args.models_from,
                       "run directory supplying frozen models (transfer setting)");
    CLI::App* c_report = add_common(app.add_subcommand("report", "summarize a run directory"));
    CLI::App* c_all = add_common(app.add_subcommand("run-all", "run the whole pipeline"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        PipelineConfig cfg = make_config(args);
        Pipeline pipeline(cfg, args.force);
        if (c_synth->parsed()) pipeline.synth_data();
        if (c_cluster->parsed()) pipeline.cluster_poses();
        if (c_gan->parsed()) pipeline.train_gan();
        if (c_gen->parsed()) pipeline.gen_normalized();
        if (c_reid->parsed()) pipeline.train_reid();
        if (c_eval->parsed()) {
            const EvalReport report = pipeline.eval(args.models_from);
            std::printf("mAP %.6f rank-1 %.6f (queries %d, excluded %d)\n", report.map,
                        report.cmc.empty() ? 0.0 : report.cmc[0], report.n_queries,
                        report.n_excluded);
        }
        if (c_report->parsed()) std::printf("%s", pipeline.report().c_str());
        if (c_all->parsed()) {
            pipeline.run_all();
            std::printf("%s", pipeline.report().c_str());
        }
        return 0;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime failure: %s\n", e.what());
        return 2;
    }
}

}  // namespace posenorm
