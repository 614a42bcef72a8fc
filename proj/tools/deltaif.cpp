#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deltaif/pipeline.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value pairs
    std::string out_dir;
    long long seed = -1;
    int jobs = 0;
    bool force = false;
};

deltaif::PipelineConfig build_config(const CliOptions& opt) {
    deltaif::PipelineConfig cfg;
    if (!opt.config_path.empty()) cfg = deltaif::load_config_file(opt.config_path);
    for (const std::string& kv : opt.overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("--set expects key=value, got '" + kv + "'");
        }
        deltaif::set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
    if (opt.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opt.seed);
    if (opt.jobs > 0) cfg.jobs = opt.jobs;
    deltaif::validate_pipeline_config(cfg);
    return cfg;
}

void print_stage(const deltaif::StageResult& r) {
    if (r.skipped) {
        std::printf("[%s] up to date, skipped\n", r.name.c_str());
    } else {
        std::printf("[%s] done in %.2f s, %zu artifact(s)\n", r.name.c_str(), r.seconds,
                    r.artifacts.size());
    }
}

void add_common(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "configuration file (flat key = value lines)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", opt.overrides, "override a config key (key=value, repeatable)");
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--seed", opt.seed, "global random seed");
    cmd->add_option("--jobs", opt.jobs, "parallel per-household jobs");
    cmd->add_flag("--force", opt.force, "rerun stages even when outputs are current");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-household hot-water demand forecasting pipeline"};
    app.require_subcommand(1);

    CliOptions opt;
    CLI::App* synth = app.add_subcommand("synth", "generate synthetic household series");
    CLI::App* preprocess = app.add_subcommand("preprocess", "resample, clean and split raw series");
    CLI::App* matrix = app.add_subcommand("matrix", "pretrain and fine-tune every source/target pair");
    CLI::App* calendar = app.add_subcommand("calendar", "detect shower events and emit weekly calendars");
    CLI::App* all = app.add_subcommand("all", "run every stage in order");
    for (CLI::App* cmd : {synth, preprocess, matrix, calendar, all}) add_common(cmd, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        const deltaif::PipelineConfig cfg = build_config(opt);
        if (synth->parsed()) {
            print_stage(deltaif::cmd_synth(cfg, opt.force));
        } else if (preprocess->parsed()) {
            print_stage(deltaif::cmd_preprocess(cfg, opt.force));
        } else if (matrix->parsed()) {
            print_stage(deltaif::cmd_matrix(cfg, opt.force));
        } else if (calendar->parsed()) {
            print_stage(deltaif::cmd_calendar(cfg, opt.force));
        } else if (all->parsed()) {
            const deltaif::RunReport report = deltaif::cmd_all(cfg, opt.force);
            for (const auto& stage : report.stages) print_stage(stage);
            std::printf("selected source: %s (%d matrix cells, %d calendars)\n",
                        report.selected_source.c_str(), report.matrix_cells, report.calendars);
            std::printf("run report: %s/run_report.json\n", cfg.out_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
