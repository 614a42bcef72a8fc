#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deltaif/eventdetect.hpp"
#include "deltaif/neuralnet.hpp"
#include "deltaif/timeseries.hpp"

namespace deltaif {

// Everything a run needs, loadable from a flat key-value file and
// overridable per key from the command line. Unknown keys are rejected.
struct PipelineConfig {
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    int jobs = 1;
    int timezone_offset_minutes = 0;

    // Data: built-in synthetic households by default, custom profiles from
    // profiles_dir (one <name>.profile per household), or raw CSV files
    // from data_dir (one <id>.csv per household).
    std::string data_dir;
    std::string profiles_dir;
    int households = 6;  // how many built-in profiles to use
    std::int64_t synth_start = 1672617600;  // 2023-01-02T00:00:00Z, a Monday
    int synth_days = 4;
    int train_days = 3;
    std::int64_t split_time = 0;  // 0: derived as synth_start + train_days

    // Preprocessing.
    std::int64_t step_seconds = 60;
    OutlierConfig outliers;

    // Model; seed is filled from the global seed.
    LstmConfig model;

    // Event detection and calendar.
    EventConfig events;
    std::string source = "auto";  // auto | random | explicit household id

    std::int64_t effective_split_time() const {
        return split_time != 0 ? split_time : synth_start + static_cast<std::int64_t>(train_days) * 86400;
    }
};

PipelineConfig load_config_file(const std::string& path);
void set_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value);
void validate_pipeline_config(const PipelineConfig& cfg);

struct StageResult {
    std::string name;
    double seconds = 0.0;
    bool skipped = false;
    std::vector<std::string> artifacts;
};

struct RunReport {
    std::vector<StageResult> stages;
    std::string selected_source;
    int matrix_cells = 0;
    int calendars = 0;
};

// Stages check a config-hash stamp and skip when their outputs are already
// current, unless force is set. A failing stage removes whatever it wrote.
StageResult cmd_synth(const PipelineConfig& cfg, bool force = false);
StageResult cmd_preprocess(const PipelineConfig& cfg, bool force = false);
StageResult cmd_matrix(const PipelineConfig& cfg, bool force = false);
StageResult cmd_calendar(const PipelineConfig& cfg, bool force = false);
RunReport cmd_all(const PipelineConfig& cfg, bool force = false);

std::string run_report_to_json(const RunReport& report);

} // namespace deltaif
