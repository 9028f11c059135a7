#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maskrr/dataset.hpp"
#include "maskrr/estimators.hpp"

namespace maskrr {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Run configuration (mirrors the JSON config file and the CLI flags).
// ---------------------------------------------------------------------------

// One configured Super Learner library member.  In the JSON config an entry
// is either a bare algorithm name ("boost") or an object with per-algorithm
// hyperparameter overrides and an optional per-member screen override:
//   {"algorithm": "boost",
//    "hyperparameters": {"rounds": 20, "depth": 1},
//    "screen": {"alpha": 0.10, "min_keep": 2}}
// Hyperparameters start from the documented defaults; only listed keys move.
struct LibraryEntry {
    std::string algorithm;
    Hyperparams hp;
    std::optional<ScreenSpec> screen;  // overrides the run-level screen settings
};

// The standard five-member library with default settings.
std::vector<LibraryEntry> default_sl_library();

struct RunConfig {
    std::string data_dir;
    std::string out_dir = "out";
    AnalysisMode mode = AnalysisMode::Primary;
    std::string target_date = "2020-09-01";
    std::string secondary_fallback_date = "2020-05-15";
    std::string window_end = "2020-10-31";
    std::string exposure_date_field = "enacted";
    std::map<std::string, std::string> custom_target_dates;  // custom mode

    std::vector<std::string> endpoints = {"cases", "deaths"};
    std::vector<int> horizons = {21, 30, 45, 60};
    std::vector<std::string> estimators = {"tmle", "gcomp", "unadjusted"};

    std::uint64_t seed = 0;
    bool seed_set = false;  // a seed must be given explicitly
    double gbound = 0.01;

    // Super Learner settings. The outcome regression (Q) and the propensity
    // score (g) share `library` unless a side-specific list is given.
    int sl_folds = 10;
    std::string q_loss = "squared_error";
    std::string g_loss = "log_loss";
    bool stratify_q = false;
    bool stratify_g = true;
    std::vector<LibraryEntry> sl_library = default_sl_library();
    std::vector<LibraryEntry> sl_library_q;  // empty = use sl_library
    std::vector<LibraryEntry> sl_library_g;  // empty = use sl_library
    double screen_alpha = 0.10;
    int screen_min_keep = 2;

    std::string exec = "openmp";  // "openmp" or "serial"
    int threads = 0;              // 0 = runtime default
};

// Parse/serialize the JSON config format. parse_run_config starts from the
// defaults above and overrides any key present. Throws ConfigError on unknown
// keys, bad types, or invalid values.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config_json(const std::string& text, const std::string& origin);
std::string run_config_to_json(const RunConfig& config);

// Validates cross-field invariants (non-empty endpoints/horizons, seed set,
// gbound in (0, 0.5), known names). Throws ConfigError.
void validate_run_config(const RunConfig& config);

// Applies exec/threads to the process-wide execution mode.
void apply_exec_config(const RunConfig& config);

// Builds the per-estimator Super Learner configs for one analysis cell.
SuperLearnerConfig make_q_config(const RunConfig& config, std::uint64_t seed);
SuperLearnerConfig make_g_config(const RunConfig& config, std::uint64_t seed);

// Deterministic per-cell seed stream.
std::uint64_t cell_seed(std::uint64_t master, const std::string& endpoint, int horizon);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct CellResult {
    std::string endpoint;
    int horizon_days = 0;
    std::uint64_t seed = 0;
    AnalysisDataset dataset;
    std::map<std::string, EffectEstimate> estimates;  // keyed by estimator name
};

struct PipelineResult {
    RunConfig config;
    std::vector<CellResult> cells;  // endpoint-major, horizon-minor order
    std::vector<Table1Row> table1;  // primary mode only
    std::vector<std::string> outputs;  // file names written (relative to out_dir)
};

// End-to-end run: load snapshot, build every (endpoint x horizon) dataset,
// run the configured estimators, and write the report files into
// config.out_dir (all writes atomic per file):
//   - table1.csv                      descriptive summary (primary mode)
//   - table2.csv                      adjusted estimates (primary mode)
//   - etable1a.csv / etable1b.csv     adjusted vs unadjusted (primary mode)
//   - etable2a.csv / etable2b.csv     the same pair in secondary mode
//   - effects_<endpoint>.csv          the same layout in custom mode
//   - etable3.csv                     propensity six-number summaries (primary)
//   - figure2_series.csv              full-precision ratio series
//   - dataset_<tag>.csv/.json         per-cell analysis datasets
//   - estimates.json                  full-precision estimates + diagnostics
//   - run_manifest.json               config echo, seeds, input/output hashes
// Errors from a cell are rethrown with the (endpoint, horizon) identified.
PipelineResult run_pipeline(const RunConfig& config);

}  // namespace maskrr
