#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "posenorm/pipeline.hpp"

using namespace posenorm;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "posenorm_pipeline_test";

int run_cli(const std::string& args) {
    const std::string cmd = std::string(POSENORM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string micro_config_json(const std::string& out_dir, const std::string& domain = "a") {
    std::ostringstream os;
    os << R"({
  "seed": 7,
  "out_dir": ")" << out_dir << R"(",
  "dataset": {"synth": {"n_identities": 4, "images_per_identity": 6, "n_cameras": 2,
                         "h": 32, "w": 16, "domain": ")" << domain << R"("}},
  "gan": {"arch": {"base_channels": 4, "n_res_blocks": 1, "discriminator_layers": 2},
           "batch_size": 4, "steps": 6, "checkpoint_every": 4},
  "cluster": {"k": 4},
  "reid": {"base_channels": 2, "feature_dim": 8, "epochs": 2, "batch_size": 4},
  "eval": {"n_poses": 2}
})";
    return os.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(kTmp);
    const fs::path p = kTmp / name;
    std::ofstream out(p);
    out << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
    const PipelineConfig cfg = PipelineConfig::from_json_text(
        R"({"dataset": {"synth": {}}, "out_dir": "x"})");
    CHECK(cfg.gan_loss.lambda1 == 10.0);
    CHECK(cfg.gan_train.learning_rate == doctest::Approx(2e-4));
    CHECK(cfg.gan_train.beta1 == 0.5);
    CHECK(cfg.gan_train.batch_size == 32);
    CHECK(cfg.reid_train.learning_rate == doctest::Approx(3.5e-4));
    CHECK(cfg.reid_train.beta1 == 0.9);
    CHECK(cfg.reid_train.batch_size == 16);
    CHECK(cfg.reid_train.dropout == 0.5);
    CHECK(cfg.n_canonical == 8);
    CHECK(cfg.taps.tap_stages == std::vector<int>{1, 2, 3});
    CHECK(cfg.protocol.cross_camera_filter);

    CHECK_THROWS_WITH_AS(
        PipelineConfig::from_json_text(R"({"dataset": {"synth": {}}, "bogus": 1})"),
        doctest::Contains("unknown key 'bogus'"), ValidationError);
    CHECK_THROWS_WITH_AS(
        PipelineConfig::from_json_text(R"({"dataset": {"synth": {"nope": 2}}})"),
        doctest::Contains("nope"), ValidationError);
    CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"dataset": {}})"), ValidationError);
    CHECK_THROWS_AS(
        PipelineConfig::from_json_text(R"({"dataset": {"synth": {}, "path": "x"}})"),
        ValidationError);
    CHECK_THROWS_AS(PipelineConfig::from_json_text("not json"), ValidationError);
    CHECK_THROWS_AS(
        PipelineConfig::from_json_text(R"({"dataset": {"synth": {}}, "gan": {"adv_mode": "x"}})"),
        ValidationError);
}

TEST_CASE("canonical config dump is stable and drives the hash") {
    const std::string text = R"({"dataset": {"synth": {}}, "seed": 3})";
    const PipelineConfig a = PipelineConfig::from_json_text(text);
    const PipelineConfig b = PipelineConfig::from_json_text(text);
    CHECK(a.canonical_dump() == b.canonical_dump());
    CHECK(a.hash() == b.hash());
    PipelineConfig c = a;
    c.seed = 4;
    CHECK(a.hash() != c.hash());
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    fs::create_directories(kTmp);
    Rng rng(5);
    Checkpoint ckpt;
    ckpt.stage = "test";
    ckpt.config_hash = 0xdeadbeefcafef00dULL;
    ckpt.step = 1234;
    ckpt.rng_state = rng.serialize();
    Tensor t1({3, 4, 5});
    Tensor t2({7});
    for (double& v : t1.data) v = rng.uniform(-1e6, 1e6);
    for (double& v : t2.data) v = rng.normal();
    t2.data[0] = 0.1 + 0.2;  // a value with a non-trivial binary expansion
    ckpt.tensors = {{"alpha", t1}, {"beta", t2}};

    const std::string path = (kTmp / "roundtrip.ckpt").string();
    save_checkpoint(path, ckpt);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.stage == "test");
    CHECK(loaded.config_hash == ckpt.config_hash);
    CHECK(loaded.step == 1234);
    CHECK(loaded.rng_state == ckpt.rng_state);
    REQUIRE(loaded.tensors.size() == 2);
    CHECK(loaded.tensors[0].second.shape == t1.shape);
    CHECK(loaded.tensors[0].second.data == t1.data);
    CHECK(loaded.tensors[1].second.data == t2.data);
}

TEST_CASE("checkpoint loading rejects corruption and shape drift") {
    fs::create_directories(kTmp);
    const std::string path = (kTmp / "broken.ckpt").string();
    Checkpoint ckpt;
    ckpt.stage = "x";
    Tensor t({4, 4});
    ckpt.tensors = {{"w", t}};
    save_checkpoint(path, ckpt);

    // Truncated file: no partial state comes back.
    const std::string full = slurp(path);
    {
        std::ofstream out(kTmp / "trunc.ckpt", std::ios::binary);
        out.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint((kTmp / "trunc.ckpt").string()), std::runtime_error);

    {
        std::ofstream out(kTmp / "magic.ckpt", std::ios::binary);
        out << "NOTACKPT" << full.substr(8);
    }
    CHECK_THROWS_AS(load_checkpoint((kTmp / "magic.ckpt").string()), std::runtime_error);

    CHECK_THROWS_AS(load_checkpoint((kTmp / "missing.ckpt").string()), ValidationError);

    // Shape mismatch against a live model names the offending tensor.
    Tensor live({2, 2}), glive({2, 2});
    const Checkpoint loaded = load_checkpoint(path);
    CHECK_THROWS_WITH_AS(
        apply_checkpoint(loaded, "", {{std::string("w"), &live, &glive}}),
        doctest::Contains("'w'"), std::runtime_error);
    Tensor other({4, 4}), gother({4, 4});
    CHECK_THROWS_WITH_AS(
        apply_checkpoint(loaded, "", {{std::string("v"), &other, &gother}}),
        doctest::Contains("missing tensor"), std::runtime_error);
}

TEST_CASE("cli rejects unknown subcommands and missing configs") {
    CHECK(run_cli("definitely-not-a-subcommand") == 1);
    CHECK(run_cli("synth-data") == 1);  // --config required
    CHECK(run_cli("synth-data --config /nonexistent/config.json") == 1);
    CHECK(run_cli("synth-data --bogus-flag --config x") == 1);
}

TEST_CASE("eval without checkpoints fails naming the missing path") {
    fs::remove_all(kTmp / "run_eval_missing");
    const fs::path cfg =
        write_config("eval_missing.json", micro_config_json((kTmp / "run_eval_missing").string()));
    REQUIRE(run_cli("synth-data --config " + cfg.string()) == 0);
    const std::string cmd = std::string(POSENORM_CLI_PATH) + " eval --config " + cfg.string() +
                            " 2> " + (kTmp / "eval_err.txt").string();
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 1);
    const std::string err = slurp(kTmp / "eval_err.txt");
    CHECK(err.find("gan.ckpt") != std::string::npos);
}

TEST_CASE("synth-data is byte-identical across reruns with the same seed") {
    fs::remove_all(kTmp / "run_synth_a");
    fs::remove_all(kTmp / "run_synth_b");
    const fs::path cfg_a =
        write_config("synth_a.json", micro_config_json((kTmp / "run_synth_a").string()));
    const fs::path cfg_b =
        write_config("synth_b.json", micro_config_json((kTmp / "run_synth_b").string()));
    REQUIRE(run_cli("synth-data --config " + cfg_a.string() + " --seed 7") == 0);
    REQUIRE(run_cli("synth-data --config " + cfg_b.string() + " --seed 7") == 0);

    for (const auto& entry :
         fs::recursive_directory_iterator(kTmp / "run_synth_a" / "dataset")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), kTmp / "run_synth_a" / "dataset");
        CHECK(slurp(entry.path()) == slurp(kTmp / "run_synth_b" / "dataset" / rel));
    }
}

TEST_CASE("run-all completes, resumes as a no-op, and is deterministic") {
    fs::remove_all(kTmp / "run_all_1");
    fs::remove_all(kTmp / "run_all_2");
    const fs::path cfg1 =
        write_config("all1.json", micro_config_json((kTmp / "run_all_1").string()));
    const fs::path cfg2 =
        write_config("all2.json", micro_config_json((kTmp / "run_all_2").string()));

    REQUIRE(run_cli("run-all --config " + cfg1.string()) == 0);
    for (const char* rel : {"config.lock.json", "manifest.json", "metrics/eval.json",
                            "metrics/cmc.csv", "losses/gan.csv", "checkpoints/gan.ckpt",
                            "checkpoints/reid.ckpt", "canonical_poses/manifest.json"})
        CHECK(fs::exists(kTmp / "run_all_1" / rel));
    // Intermediate checkpoint from checkpoint_every=4 at step 4 of 6.
    CHECK(fs::exists(kTmp / "run_all_1" / "checkpoints" / "gan_step4.ckpt"));

    const std::string eval1 = slurp(kTmp / "run_all_1" / "metrics" / "eval.json");
    REQUIRE(run_cli("run-all --config " + cfg2.string()) == 0);
    CHECK(eval1 == slurp(kTmp / "run_all_2" / "metrics" / "eval.json"));

    // Rerunning skips completed stages but still succeeds.
    REQUIRE(run_cli("run-all --config " + cfg1.string()) == 0);
    CHECK(eval1 == slurp(kTmp / "run_all_1" / "metrics" / "eval.json"));

    // report works on a completed run
    CHECK(run_cli("report --config " + cfg1.string()) == 0);
}

TEST_CASE("a locked run directory refuses a second owner") {
    fs::remove_all(kTmp / "run_locked");
    const fs::path cfg =
        write_config("locked.json", micro_config_json((kTmp / "run_locked").string()));
    fs::create_directories(kTmp / "run_locked");
    {
        std::ofstream lock(kTmp / "run_locked" / ".lock");
        lock << "99999\n";
    }
    CHECK(run_cli("synth-data --config " + cfg.string()) == 1);
    fs::remove(kTmp / "run_locked" / ".lock");
    CHECK(run_cli("synth-data --config " + cfg.string()) == 0);
}

TEST_CASE("a config change in an existing run directory is refused") {
    fs::remove_all(kTmp / "run_cfgchange");
    const fs::path cfg =
        write_config("change1.json", micro_config_json((kTmp / "run_cfgchange").string()));
    REQUIRE(run_cli("synth-data --config " + cfg.string()) == 0);
    // Same out_dir, different seed -> different canonical config.
    CHECK(run_cli("synth-data --config " + cfg.string() + " --seed 8") == 1);
}

TEST_CASE("transfer evaluation consumes models from another run directory") {
    fs::remove_all(kTmp / "run_src");
    fs::remove_all(kTmp / "run_tgt");
    const fs::path cfg_src =
        write_config("tl_src.json", micro_config_json((kTmp / "run_src").string(), "a"));
    const fs::path cfg_tgt =
        write_config("tl_tgt.json", micro_config_json((kTmp / "run_tgt").string(), "b"));
    REQUIRE(run_cli("run-all --config " + cfg_src.string()) == 0);
    REQUIRE(run_cli("synth-data --config " + cfg_tgt.string()) == 0);
    CHECK(run_cli("eval --config " + cfg_tgt.string() + " --models-from " +
                  (kTmp / "run_src").string()) == 0);
    CHECK(fs::exists(kTmp / "run_tgt" / "metrics" / "eval.json"));
}
