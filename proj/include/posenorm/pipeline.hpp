#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "posenorm/canonical_poses.hpp"
#include "posenorm/gan_training.hpp"
#include "posenorm/reid_features.hpp"
#include "posenorm/retrieval_eval.hpp"
#include "posenorm/synth_data.hpp"

namespace posenorm {

// Configuration or input errors that should exit with status 1; anything else
// escaping a stage is treated as a runtime failure (exit 2).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    uint64_t seed = 1;
    std::string out_dir = "runs/default";

    std::optional<SynthConfig> synth;  // generate the dataset ...
    std::string dataset_path;          // ... or ingest an existing directory

    ArchConfig gan_arch{8, 9, 64, 32, 3};
    GanLossConfig gan_loss;
    GanTrainConfig gan_train;
    int gan_checkpoint_every = 0;  // extra checkpoints every N steps; 0 = final only

    BackboneArch reid_arch{8, 64, 64, 32};
    FeatureTapSpec taps;
    ReidTrainConfig reid_train;
    bool b_sees_originals = false;

    int n_canonical = 8;
    int kmeans_max_iter = 100;
    EmbedderConfig embedder;
    bool emit_projection_csv = true;

    EvalProtocol protocol;
    EvalOptions eval_options;

    static PipelineConfig from_file(const std::string& path);
    static PipelineConfig from_json_text(const std::string& text);
    std::string canonical_dump() const;  // sorted keys, stable bytes
    uint64_t hash() const;
    void validate() const;
};

// Binary checkpoint: named parameter tensors plus provenance fields. The
// round trip is bit-exact.
struct Checkpoint {
    uint32_t version = 1;
    std::string stage;
    uint64_t config_hash = 0;
    int64_t step = 0;
    std::string rng_state;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Copy checkpoint tensors into live parameters; every parameter must be
// present with a matching shape.
void apply_checkpoint(const Checkpoint& ckpt, const std::string& prefix,
                      std::vector<NamedParam> params);
void append_params(Checkpoint& ckpt, const std::string& prefix, std::vector<NamedParam> params);

struct RunPaths {
    std::filesystem::path root;
    std::filesystem::path dataset;
    std::filesystem::path checkpoints;
    std::filesystem::path canonical;
    std::filesystem::path synth;
    std::filesystem::path metrics;
    std::filesystem::path losses;
    std::filesystem::path grids;
    std::filesystem::path stages;

    static RunPaths at(const std::filesystem::path& root);
    void create_all() const;
};

// One pipeline run bound to a run directory: owns the directory lock, the
// completed-stage markers, and lazily loaded artifacts.
class Pipeline {
public:
    Pipeline(PipelineConfig cfg, bool force = false);
    ~Pipeline();

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    void synth_data();
    void cluster_poses();
    void train_gan();
    void gen_normalized();
    void train_reid();
    // models_from: run directory supplying generator/backbones/poses (the
    // transfer setting); empty means this run's own artifacts.
    EvalReport eval(const std::string& models_from = "");
    std::string report();
    void run_all();

    const PipelineConfig& config() const { return cfg_; }
    const RunPaths& paths() const { return paths_; }

private:
    SynthDataset& dataset();
    CanonicalPoseSet load_canonical(const std::filesystem::path& dir);
    bool stage_done(const std::string& stage) const;
    void mark_done(const std::string& stage);
    bool skip_if_done(const std::string& stage);
    void append_manifest(const std::string& stage, double duration_s,
                         const std::vector<std::string>& outputs,
                         const std::map<std::string, double>& summary);

    PipelineConfig cfg_;
    RunPaths paths_;
    bool force_ = false;
    int lock_fd_ = -1;
    std::optional<SynthDataset> dataset_;
};

int cli_main(int argc, char** argv);

}  // namespace posenorm
