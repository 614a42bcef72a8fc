#include "deltaif/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>

#include <json.hpp>

#include "deltaif/calendar.hpp"
#include "deltaif/rng.hpp"
#include "deltaif/synthgen.hpp"
#include "deltaif/timeutil.hpp"
#include "deltaif/transfer.hpp"

namespace fs = std::filesystem;

namespace deltaif {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Tracks files a stage writes so a failure can roll them back.
class ArtifactWriter {
public:
    void write(const std::string& path, const std::string& content) {
        fs::create_directories(fs::path(path).parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path + " for writing");
        out << content;
        if (!out) throw std::runtime_error("write failure on " + path);
        written_.push_back(path);
    }
    void note(const std::string& path) { written_.push_back(path); }  // written externally
    const std::vector<std::string>& written() const { return written_; }
    void rollback() {
        for (const std::string& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

private:
    std::vector<std::string> written_;
};

std::string stamp_path(const PipelineConfig& cfg, const std::string& stage) {
    return cfg.out_dir + "/.stamps/" + stage + ".json";
}

bool stage_is_current(const PipelineConfig& cfg, const std::string& stage, std::uint64_t hash,
                      std::vector<std::string>* artifacts) {
    const std::string path = stamp_path(cfg, stage);
    if (!fs::exists(path)) return false;
    try {
        const nlohmann::json j = nlohmann::json::parse(read_file(path));
        if (j.at("hash").get<std::uint64_t>() != hash) return false;
        const auto files = j.at("artifacts").get<std::vector<std::string>>();
        for (const std::string& f : files) {
            if (!fs::exists(f)) return false;
        }
        if (artifacts != nullptr) *artifacts = files;
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void write_stamp(const PipelineConfig& cfg, const std::string& stage, std::uint64_t hash,
                 const std::vector<std::string>& artifacts) {
    nlohmann::json j;
    j["hash"] = hash;
    j["artifacts"] = artifacts;
    fs::create_directories(cfg.out_dir + "/.stamps");
    std::ofstream out(stamp_path(cfg, stage), std::ios::binary);
    out << j.dump(2) << "\n";
}

StageResult run_stage(const PipelineConfig& cfg, const std::string& stage, std::uint64_t hash,
                      bool force, const std::function<void(ArtifactWriter&)>& body) {
    StageResult result;
    result.name = stage;
    if (!force && stage_is_current(cfg, stage, hash, &result.artifacts)) {
        result.skipped = true;
        return result;
    }
    {
        std::error_code ec;
        fs::remove(stamp_path(cfg, stage), ec);
    }
    ArtifactWriter writer;
    const double t0 = now_seconds();
    try {
        body(writer);
    } catch (...) {
        writer.rollback();
        throw;
    }
    result.seconds = now_seconds() - t0;
    result.artifacts = writer.written();
    write_stamp(cfg, stage, hash, result.artifacts);
    return result;
}

// --- config hashing ------------------------------------------------------

std::string synth_desc(const PipelineConfig& c) {
    return "synth|seed=" + std::to_string(c.seed) + "|households=" + std::to_string(c.households) +
           "|start=" + std::to_string(c.synth_start) + "|days=" + std::to_string(c.synth_days) +
           "|profiles=" + (c.profiles_dir.empty() ? "v1" : c.profiles_dir);
}

std::string preprocess_desc(const PipelineConfig& c) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "|range=[%.17g,%.17g]|rate=%.17g", c.outliers.range_min,
                  c.outliers.range_max, c.outliers.rate_limit);
    return synth_desc(c) + "|prep|data_dir=" + c.data_dir + "|step=" +
           std::to_string(c.step_seconds) + "|split=" + std::to_string(c.effective_split_time()) +
           buf;
}

std::string matrix_desc(const PipelineConfig& c) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "|lr=%.17g", c.model.learning_rate);
    return preprocess_desc(c) + "|matrix|units=" + std::to_string(c.model.units) + "|lookback=" +
           std::to_string(c.model.lookback) + "|epochs=" + std::to_string(c.model.epochs) +
           "|batch=" + std::to_string(c.model.batch_size) + "|ft=" +
           std::to_string(c.model.fine_tune_epochs) + buf;
}

std::string calendar_desc(const PipelineConfig& c) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "|contamination=%.17g", c.events.contamination);
    return matrix_desc(c) + "|calendar|dw=" + std::to_string(c.events.delta_window) + "|refract=" +
           std::to_string(c.events.refractory) + "|trees=" + std::to_string(c.events.n_trees) +
           "|sub=" + std::to_string(c.events.subsample) + "|tz=" +
           std::to_string(c.timezone_offset_minutes) + "|source=" + c.source + buf;
}

// --- shared helpers ------------------------------------------------------

// Active household profiles: built-ins, or every *.profile file in
// profiles_dir (sorted by filename for a stable order).
std::vector<HouseholdProfile> load_profiles(const PipelineConfig& cfg) {
    if (cfg.profiles_dir.empty()) {
        auto profiles = default_profiles();
        profiles.resize(static_cast<std::size_t>(cfg.households));
        return profiles;
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(cfg.profiles_dir)) {
        if (entry.path().extension() == ".profile") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<HouseholdProfile> profiles;
    for (const fs::path& f : files) {
        try {
            profiles.push_back(parse_profile(read_file(f.string())));
        } catch (const std::exception& e) {
            throw std::runtime_error(f.string() + ": " + e.what());
        }
        for (std::size_t i = 0; i + 1 < profiles.size(); ++i) {
            if (profiles[i].id == profiles.back().id) {
                throw std::runtime_error("duplicate profile id '" + profiles.back().id +
                                         "' in " + f.string());
            }
        }
    }
    if (profiles.size() < 2) {
        throw std::runtime_error("need at least 2 .profile files in " + cfg.profiles_dir);
    }
    return profiles;
}

std::vector<std::string> household_ids(const PipelineConfig& cfg) {
    std::vector<std::string> ids;
    if (cfg.data_dir.empty()) {
        for (const HouseholdProfile& p : load_profiles(cfg)) ids.push_back(p.id);
    } else {
        for (const auto& entry : fs::directory_iterator(cfg.data_dir)) {
            if (entry.path().extension() == ".csv") ids.push_back(entry.path().stem().string());
        }
        std::sort(ids.begin(), ids.end());
        if (ids.empty()) throw std::runtime_error("no .csv files found in " + cfg.data_dir);
    }
    return ids;
}

std::string raw_csv_path(const PipelineConfig& cfg, const std::string& id) {
    return cfg.data_dir.empty() ? cfg.out_dir + "/data/" + id + ".csv"
                                : cfg.data_dir + "/" + id + ".csv";
}

RegularSeries load_regular_csv(const std::string& path, const std::string& id,
                               std::int64_t step_seconds) {
    return forward_fill_resample(parse_series(read_file(path), id), step_seconds);
}

std::vector<HouseholdData> load_prep(const PipelineConfig& cfg) {
    std::vector<HouseholdData> out;
    for (const std::string& id : household_ids(cfg)) {
        const std::string train_path = cfg.out_dir + "/prep/" + id + "_train.csv";
        const std::string test_path = cfg.out_dir + "/prep/" + id + "_test.csv";
        if (!fs::exists(train_path) || !fs::exists(test_path)) {
            throw std::runtime_error("missing preprocessed series for " + id +
                                     "; run the preprocess stage first");
        }
        out.push_back({id, load_regular_csv(train_path, id, cfg.step_seconds),
                       load_regular_csv(test_path, id, cfg.step_seconds)});
    }
    return out;
}

std::string resolve_source(const PipelineConfig& cfg, const std::vector<std::string>& ids) {
    if (cfg.source == "auto") {
        const nlohmann::json timing =
            nlohmann::json::parse(read_file(cfg.out_dir + "/timing.json"));
        return timing.at("source_id").get<std::string>();
    }
    if (cfg.source == "random") {
        Rng rng(cfg.seed + 777);
        return ids[rng.below(ids.size())];
    }
    if (std::find(ids.begin(), ids.end(), cfg.source) == ids.end()) {
        throw std::runtime_error("configured source '" + cfg.source + "' is not a household id");
    }
    return cfg.source;
}

nlohmann::json timing_to_json(const TimingReport& t, const std::vector<std::string>& ids) {
    nlohmann::json from_scratch;
    for (std::size_t i = 0; i < ids.size(); ++i) from_scratch[ids[i]] = t.from_scratch_seconds[i];
    return nlohmann::json{
        {"from_scratch_seconds", from_scratch},
        {"pretrain_seconds", t.pretrain_seconds},
        {"fine_tune_total_seconds", t.fine_tune_total_seconds},
        {"percent_saved", t.percent_saved},
        {"epoch_unit_saving", t.epoch_unit_saving},
        {"source_id", t.source_id},
    };
}

} // namespace

// --- config --------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

long long to_ll(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': not an integer: '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': not a number: '" + value + "'");
    }
}

} // namespace

void set_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "out_dir") cfg.out_dir = value;
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_ll(key, value));
    else if (key == "jobs") cfg.jobs = static_cast<int>(to_ll(key, value));
    else if (key == "timezone_offset_minutes") cfg.timezone_offset_minutes = static_cast<int>(to_ll(key, value));
    else if (key == "data_dir") cfg.data_dir = value;
    else if (key == "profiles_dir") cfg.profiles_dir = value;
    else if (key == "households") cfg.households = static_cast<int>(to_ll(key, value));
    else if (key == "synth_start") cfg.synth_start = parse_iso8601(value);
    else if (key == "synth_days") cfg.synth_days = static_cast<int>(to_ll(key, value));
    else if (key == "train_days") cfg.train_days = static_cast<int>(to_ll(key, value));
    else if (key == "split_time") cfg.split_time = parse_iso8601(value);
    else if (key == "step_seconds") cfg.step_seconds = to_ll(key, value);
    else if (key == "range_min") cfg.outliers.range_min = to_double(key, value);
    else if (key == "range_max") cfg.outliers.range_max = to_double(key, value);
    else if (key == "rate_limit") cfg.outliers.rate_limit = to_double(key, value);
    else if (key == "units") cfg.model.units = static_cast<int>(to_ll(key, value));
    else if (key == "lookback") cfg.model.lookback = static_cast<int>(to_ll(key, value));
    else if (key == "epochs") cfg.model.epochs = static_cast<int>(to_ll(key, value));
    else if (key == "batch_size") cfg.model.batch_size = static_cast<int>(to_ll(key, value));
    else if (key == "learning_rate") cfg.model.learning_rate = to_double(key, value);
    else if (key == "fine_tune_epochs") cfg.model.fine_tune_epochs = static_cast<int>(to_ll(key, value));
    else if (key == "contamination") cfg.events.contamination = to_double(key, value);
    else if (key == "delta_window") cfg.events.delta_window = static_cast<int>(to_ll(key, value));
    else if (key == "refractory") cfg.events.refractory = static_cast<int>(to_ll(key, value));
    else if (key == "n_trees") cfg.events.n_trees = static_cast<int>(to_ll(key, value));
    else if (key == "subsample") cfg.events.subsample = static_cast<int>(to_ll(key, value));
    else if (key == "source") cfg.source = value;
    else throw std::runtime_error("unknown config key '" + key + "'");
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    PipelineConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected 'key = value'");
        }
        try {
            set_config_key(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

void validate_pipeline_config(const PipelineConfig& cfg) {
    validate_config(cfg.model);
    validate_event_config(cfg.events);
    if (cfg.out_dir.empty()) throw std::runtime_error("config: out_dir must not be empty");
    if (cfg.jobs < 1) throw std::runtime_error("config: jobs must be >= 1");
    if (cfg.data_dir.empty()) {
        if (cfg.profiles_dir.empty() && (cfg.households < 2 || cfg.households > 6)) {
            throw std::runtime_error("config: households must be in [2, 6]");
        }
        if (cfg.synth_days < 2 || cfg.train_days < 1 || cfg.train_days >= cfg.synth_days) {
            throw std::runtime_error("config: need synth_days >= 2 and 1 <= train_days < synth_days");
        }
    }
    if (cfg.step_seconds <= 0) throw std::runtime_error("config: step_seconds must be positive");
    if (cfg.outliers.range_min >= cfg.outliers.range_max || cfg.outliers.rate_limit <= 0.0) {
        throw std::runtime_error("config: bad outlier bounds");
    }
    if (cfg.model.epochs < 1) throw std::runtime_error("config: epochs must be >= 1");
    if (cfg.model.fine_tune_epochs < 1) throw std::runtime_error("config: fine_tune_epochs must be >= 1");
}

// --- stages --------------------------------------------------------------

StageResult cmd_synth(const PipelineConfig& cfg, bool force) {
    validate_pipeline_config(cfg);
    return run_stage(cfg, "synth", fnv1a(synth_desc(cfg)), force, [&](ArtifactWriter& w) {
        if (!cfg.data_dir.empty()) return;  // external data, nothing to generate
        const auto profiles = load_profiles(cfg);
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            const RegularSeries series = generate_household(
                profiles[i], cfg.synth_start, cfg.synth_days, cfg.seed + 1000 + i);
            w.write(cfg.out_dir + "/data/" + profiles[i].id + ".csv", to_csv(series));
        }
    });
}

StageResult cmd_preprocess(const PipelineConfig& cfg, bool force) {
    validate_pipeline_config(cfg);
    return run_stage(cfg, "preprocess", fnv1a(preprocess_desc(cfg)), force, [&](ArtifactWriter& w) {
        for (const std::string& id : household_ids(cfg)) {
            const std::string path = raw_csv_path(cfg, id);
            if (!fs::exists(path)) {
                throw std::runtime_error("missing input " + path + "; run the synth stage first");
            }
            const RawSeries raw = parse_series(read_file(path), id);
            const RegularSeries filled = forward_fill_resample(raw, cfg.step_seconds);
            const auto [clean, report] = remove_outliers(filled, cfg.outliers);
            const auto [train_part, test_part] = split_train_test(clean, cfg.effective_split_time());
            w.write(cfg.out_dir + "/prep/" + id + "_train.csv", to_csv(train_part));
            w.write(cfg.out_dir + "/prep/" + id + "_test.csv", to_csv(test_part));
        }
    });
}

StageResult cmd_matrix(const PipelineConfig& cfg, bool force) {
    validate_pipeline_config(cfg);
    return run_stage(cfg, "matrix", fnv1a(matrix_desc(cfg)), force, [&](ArtifactWriter& w) {
        const std::vector<HouseholdData> households = load_prep(cfg);
        LstmConfig model_cfg = cfg.model;
        model_cfg.seed = cfg.seed;

        MatrixOptions options;
        options.jobs = cfg.jobs;
        options.checkpoint_dir = cfg.out_dir + "/models";
        fs::create_directories(options.checkpoint_dir);

        // Checkpoints are written by the matrix run itself; register them
        // up front so a failure rolls back whichever ones already landed.
        for (std::size_t s = 0; s < households.size(); ++s) {
            w.note(options.checkpoint_dir + "/pretrain_" + households[s].id + ".json");
            for (std::size_t t = 0; t < households.size(); ++t) {
                if (t != s) {
                    w.note(options.checkpoint_dir + "/finetune_" + households[s].id + "_to_" +
                           households[t].id + ".json");
                }
            }
        }

        const auto [matrix, timing] = run_transfer_matrix(households, model_cfg, options);
        w.write(cfg.out_dir + "/matrix.csv", matrix_to_csv(matrix));
        w.write(cfg.out_dir + "/timing.json",
                timing_to_json(timing, matrix.households).dump(2) + "\n");
    });
}

StageResult cmd_calendar(const PipelineConfig& cfg, bool force) {
    validate_pipeline_config(cfg);
    return run_stage(cfg, "calendar", fnv1a(calendar_desc(cfg)), force, [&](ArtifactWriter& w) {
        const std::vector<std::string> ids = household_ids(cfg);
        const std::string source = resolve_source(cfg, ids);

        for (std::size_t t = 0; t < ids.size(); ++t) {
            if (ids[t] == source) continue;
            const std::string model_path =
                cfg.out_dir + "/models/finetune_" + source + "_to_" + ids[t] + ".json";
            if (!fs::exists(model_path)) {
                throw std::runtime_error("missing checkpoint " + model_path +
                                         "; run the matrix stage first");
            }
            const LstmModel model = load_model(model_path);
            const RegularSeries test = load_regular_csv(
                cfg.out_dir + "/prep/" + ids[t] + "_test.csv", ids[t], cfg.step_seconds);
            const RegularSeries predicted = predict_series(model, test);

            const std::vector<Event> events =
                detect_events(predicted, cfg.events, cfg.seed + 2000 + t);
            const WeeklyCalendar cal = build_calendar(
                events, ids[t], predicted.start, predicted.end_time() + predicted.step_seconds,
                cfg.timezone_offset_minutes, cfg.events.contamination);

            w.write(cfg.out_dir + "/events_" + ids[t] + ".csv", events_to_csv(events, ids[t]));
            w.write(cfg.out_dir + "/calendar_" + ids[t] + ".csv", calendar_to_csv(cal));
            w.write(cfg.out_dir + "/calendar_" + ids[t] + ".json", calendar_to_json(cal));
        }
    });
}

RunReport cmd_all(const PipelineConfig& cfg, bool force) {
    RunReport report;
    report.stages.push_back(cmd_synth(cfg, force));
    report.stages.push_back(cmd_preprocess(cfg, force));
    report.stages.push_back(cmd_matrix(cfg, force));
    report.stages.push_back(cmd_calendar(cfg, force));

    const std::vector<std::string> ids = household_ids(cfg);
    report.selected_source = resolve_source(cfg, ids);
    report.matrix_cells = static_cast<int>(ids.size() * ids.size());
    report.calendars = static_cast<int>(ids.size()) - 1;

    std::ofstream out(cfg.out_dir + "/run_report.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write run report");
    out << run_report_to_json(report);
    return report;
}

std::string run_report_to_json(const RunReport& report) {
    nlohmann::json stages = nlohmann::json::array();
    for (const StageResult& s : report.stages) {
        stages.push_back({{"name", s.name},
                          {"seconds", s.seconds},
                          {"skipped", s.skipped},
                          {"artifacts", s.artifacts}});
    }
    const nlohmann::json j{
        {"stages", stages},
        {"selected_source", report.selected_source},
        {"matrix_cells", report.matrix_cells},
        {"calendars", report.calendars},
    };
    return j.dump(2) + "\n";
}

} // namespace deltaif
