#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "deltaif/pipeline.hpp"

using namespace deltaif;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

// Small enough to run the full pipeline in a couple of seconds.
PipelineConfig tiny_config(const std::string& out_dir) {
    PipelineConfig cfg;
    cfg.out_dir = out_dir;
    cfg.seed = 4;
    cfg.households = 2;
    cfg.synth_days = 2;
    cfg.train_days = 1;
    cfg.model.units = 4;
    cfg.model.lookback = 12;
    cfg.model.epochs = 2;
    cfg.model.batch_size = 64;
    cfg.model.learning_rate = 0.01;
    cfg.model.fine_tune_epochs = 1;
    cfg.events.subsample = 128;
    cfg.events.n_trees = 25;
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("config file parsing, overrides and rejection of unknown keys") {
    TempDir dir("deltaif_cfg_test");
    const fs::path cfg_path = dir.path / "run.cfg";
    spit(cfg_path,
         "# comment line\n"
         "seed = 9\n"
         "households = 3\n"
         "  epochs = 5  \n"
         "contamination = 0.05\n"
         "synth_start = 2023-01-09T00:00:00Z\n"
         "\n");
    PipelineConfig cfg = load_config_file(cfg_path.string());
    CHECK(cfg.seed == 9);
    CHECK(cfg.households == 3);
    CHECK(cfg.model.epochs == 5);
    CHECK(cfg.events.contamination == 0.05);
    CHECK(cfg.synth_start == 1672617600 + 7 * 86400);

    spit(cfg_path, "no_such_key = 1\n");
    CHECK_THROWS_WITH_AS(load_config_file(cfg_path.string()),
                         doctest::Contains("unknown config key"), std::runtime_error);
    spit(cfg_path, "epochs ten\n");
    CHECK_THROWS_AS(load_config_file(cfg_path.string()), std::runtime_error);
    spit(cfg_path, "epochs = ten\n");
    CHECK_THROWS_AS(load_config_file(cfg_path.string()), std::runtime_error);
}

TEST_CASE("validation rejects nonsense before any work happens") {
    PipelineConfig cfg = tiny_config("unused");
    cfg.model.epochs = -1;
    CHECK_THROWS_AS(validate_pipeline_config(cfg), std::invalid_argument);
    cfg = tiny_config("unused");
    cfg.events.contamination = 1.5;
    CHECK_THROWS_AS(validate_pipeline_config(cfg), std::invalid_argument);
    cfg = tiny_config("unused");
    cfg.train_days = 5;
    CHECK_THROWS_AS(validate_pipeline_config(cfg), std::runtime_error);
    cfg = tiny_config("unused");
    cfg.households = 9;
    CHECK_THROWS_AS(validate_pipeline_config(cfg), std::runtime_error);
}

TEST_CASE("stages demand their prerequisites") {
    TempDir dir("deltaif_pipe_missing");
    const PipelineConfig cfg = tiny_config((dir.path / "out").string());
    CHECK_THROWS_WITH_AS(cmd_preprocess(cfg), doctest::Contains("synth"), std::runtime_error);
    CHECK_THROWS_WITH_AS(cmd_matrix(cfg), doctest::Contains("preprocess"), std::runtime_error);
    CHECK_THROWS_AS(cmd_calendar(cfg), std::runtime_error);
}

TEST_CASE("full pipeline produces the documented artifacts and skips cleanly") {
    TempDir dir("deltaif_pipe_full");
    const std::string out = (dir.path / "out").string();
    const PipelineConfig cfg = tiny_config(out);

    const RunReport report = cmd_all(cfg);
    CHECK(report.matrix_cells == 4);
    CHECK(report.calendars == 1);
    CHECK(!report.selected_source.empty());
    for (const StageResult& s : report.stages) CHECK(!s.skipped);

    CHECK(fs::exists(out + "/data/h1.csv"));
    CHECK(fs::exists(out + "/prep/h1_train.csv"));
    CHECK(fs::exists(out + "/prep/h2_test.csv"));
    CHECK(fs::exists(out + "/matrix.csv"));
    CHECK(fs::exists(out + "/timing.json"));
    CHECK(fs::exists(out + "/run_report.json"));
    const std::string target = report.selected_source == "h1" ? "h2" : "h1";
    CHECK(fs::exists(out + "/events_" + target + ".csv"));
    CHECK(fs::exists(out + "/calendar_" + target + ".csv"));
    CHECK(fs::exists(out + "/calendar_" + target + ".json"));
    CHECK(fs::exists(out + "/models/pretrain_h1.json"));
    CHECK(fs::exists(out + "/models/finetune_h1_to_h2.json"));

    // Unchanged config: every stage reports itself as up to date.
    const RunReport second = cmd_all(cfg);
    for (const StageResult& s : second.stages) CHECK(s.skipped);

    // Changing a knob invalidates the stages that depend on it.
    PipelineConfig different = cfg;
    different.events.refractory = 45;
    const StageResult cal = cmd_calendar(different);
    CHECK(!cal.skipped);
    const StageResult synth_again = cmd_synth(different);
    CHECK(synth_again.skipped);

    // Forcing reruns everything.
    const StageResult forced = cmd_synth(cfg, true);
    CHECK(!forced.skipped);
}

TEST_CASE("rerun with the same seed reproduces artifacts byte for byte") {
    TempDir dir("deltaif_pipe_det");
    PipelineConfig a = tiny_config((dir.path / "a").string());
    PipelineConfig b = tiny_config((dir.path / "b").string());
    const RunReport ra = cmd_all(a);
    const RunReport rb = cmd_all(b);
    CHECK(ra.selected_source == rb.selected_source);

    for (const std::string name : {"data/h1.csv", "data/h2.csv", "prep/h1_train.csv",
                                   "prep/h2_test.csv"}) {
        CHECK(slurp(dir.path / "a" / name) == slurp(dir.path / "b" / name));
    }
    const std::string target = ra.selected_source == "h1" ? "h2" : "h1";
    for (const std::string name :
         {"events_" + target + ".csv", "calendar_" + target + ".csv",
          "calendar_" + target + ".json"}) {
        CHECK(slurp(dir.path / "a" / name) == slurp(dir.path / "b" / name));
    }

    // Matrix metrics are identical once the wall-clock column is masked.
    auto strip_seconds = [](std::string text) {
        std::string out;
        for (std::size_t pos = 0; pos < text.size();) {
            const std::size_t nl = text.find('\n', pos);
            const std::string line = text.substr(pos, nl - pos);
            out += line.substr(0, line.rfind(','));
            out += '\n';
            pos = nl + 1;
        }
        return out;
    };
    CHECK(strip_seconds(slurp(dir.path / "a/matrix.csv")) ==
          strip_seconds(slurp(dir.path / "b/matrix.csv")));
}

TEST_CASE("custom profile files drive the synth stage") {
    TempDir dir("deltaif_pipe_profiles");
    PipelineConfig cfg = tiny_config((dir.path / "out").string());
    cfg.profiles_dir = (dir.path / "profiles").string();
    const std::string base =
        "base_temp = 50\nheat_on = 44\nheat_off = 54\nheat_rate = 0.4\n"
        "cool_rate = 0.04\nnoise_sigma = 0.05\nirregularity = 0\n"
        "shower = 1 07:00 10 0.8\n";
    spit(dir.path / "profiles/alpha.profile", "id = alpha\n" + base);
    spit(dir.path / "profiles/beta.profile", "id = beta\n" + base);

    const StageResult synth = cmd_synth(cfg);
    CHECK(synth.artifacts.size() == 2);
    CHECK(fs::exists(dir.path / "out/data/alpha.csv"));
    CHECK(fs::exists(dir.path / "out/data/beta.csv"));
    const StageResult prep = cmd_preprocess(cfg);
    CHECK(prep.artifacts.size() == 4);
    CHECK(fs::exists(dir.path / "out/prep/beta_test.csv"));

    PipelineConfig lone = cfg;
    lone.profiles_dir = (dir.path / "lonely").string();
    fs::create_directories(dir.path / "lonely");
    spit(dir.path / "lonely/one.profile", "id = one\n" + base);
    CHECK_THROWS_WITH_AS(cmd_synth(lone, true), doctest::Contains("at least 2"),
                         std::runtime_error);

    spit(dir.path / "profiles/clone.profile", "id = alpha\n" + base);
    CHECK_THROWS_WITH_AS(cmd_synth(cfg, true), doctest::Contains("duplicate profile id"),
                         std::runtime_error);
}

TEST_CASE("a failing stage removes its partial outputs") {
    TempDir dir("deltaif_pipe_rollback");
    PipelineConfig cfg = tiny_config((dir.path / "out").string());
    cfg.data_dir = (dir.path / "raw").string();
    spit(dir.path / "raw/a.csv",
         "timestamp,t_mid\n2023-01-02T00:00:00Z,50\n2023-01-04T00:00:00Z,49\n");
    spit(dir.path / "raw/b.csv", "timestamp,t_mid\nbroken-row,50\n");

    CHECK_THROWS_AS(cmd_preprocess(cfg), std::runtime_error);
    CHECK(!fs::exists(dir.path / "out/prep/a_train.csv"));
    CHECK(!fs::exists(dir.path / "out/prep/a_test.csv"));
}
