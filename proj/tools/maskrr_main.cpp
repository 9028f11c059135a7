// Command-line front end: validate snapshots, build analysis datasets,
// run single-cell estimates, run simulation experiments, and produce the
// full report bundle.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "maskrr/parallel.hpp"
#include "maskrr/pipeline.hpp"
#include "maskrr/rng.hpp"
#include "maskrr/simlab.hpp"

namespace {

using maskrr::RunConfig;

// Options shared by every subcommand; CLI flags override the config file,
// which overrides compiled defaults.
struct CommonOpts {
    std::string config_path;
    std::optional<std::string> data_dir, out_dir, mode, target_date, fallback_date, window_end,
        date_field, exec, q_loss, g_loss;
    std::optional<std::vector<std::string>> endpoints, estimators, library;
    std::optional<std::vector<int>> horizons;
    std::optional<std::uint64_t> seed;
    std::optional<double> gbound, screen_alpha;
    std::optional<int> folds, screen_min_keep, threads;
    std::optional<bool> stratify_q, stratify_g;
    bool serial = false;
};

void add_common_options(CLI::App* cmd, CommonOpts* o) {
    cmd->add_option("--config", o->config_path, "JSON config file");
    cmd->add_option("--data", o->data_dir, "snapshot directory");
    cmd->add_option("--out", o->out_dir, "output directory");
    cmd->add_option("--mode", o->mode, "primary | secondary | custom");
    cmd->add_option("--target-date", o->target_date, "fixed target date (primary mode)");
    cmd->add_option("--fallback-date", o->fallback_date,
                    "target date for states that never issued stay-at-home (secondary mode)");
    cmd->add_option("--window-end", o->window_end, "end of the analysis window");
    cmd->add_option("--date-field", o->date_field,
                    "policy date the exposure keys on: enacted | issued");
    cmd->add_option("--endpoints", o->endpoints, "outcome endpoints (cases, deaths)");
    cmd->add_option("--horizons", o->horizons, "outcome horizons in days");
    cmd->add_option("--estimators", o->estimators, "estimators to run (tmle, gcomp, unadjusted)");
    cmd->add_option("--seed", o->seed, "master random seed");
    cmd->add_option("--gbound", o->gbound, "propensity truncation bound");
    cmd->add_option("--folds", o->folds, "cross-validation folds");
    cmd->add_option("--library", o->library, "learner library (mean, spline, tree, boost, mars)");
    cmd->add_option("--q-loss", o->q_loss, "meta-learning loss for the outcome regression");
    cmd->add_option("--g-loss", o->g_loss, "meta-learning loss for the propensity score");
    cmd->add_option("--stratify-q", o->stratify_q, "stratify outcome-regression folds");
    cmd->add_option("--stratify-g", o->stratify_g, "stratify propensity folds on the exposure");
    cmd->add_option("--screen-alpha", o->screen_alpha, "screening p-value threshold");
    cmd->add_option("--screen-min-keep", o->screen_min_keep, "minimum columns kept by the screen");
    cmd->add_option("--threads", o->threads, "worker threads (0 = runtime default)");
    cmd->add_flag("--serial", o->serial, "run single-threaded (same results, for timing/debug)");
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig c;
    if (!o.config_path.empty()) c = maskrr::load_run_config(o.config_path);
    if (o.data_dir) c.data_dir = *o.data_dir;
    if (o.out_dir) c.out_dir = *o.out_dir;
    if (o.mode) c.mode = maskrr::analysis_mode_from_name(*o.mode);
    if (o.target_date) c.target_date = *o.target_date;
    if (o.fallback_date) c.secondary_fallback_date = *o.fallback_date;
    if (o.window_end) c.window_end = *o.window_end;
    if (o.date_field) c.exposure_date_field = *o.date_field;
    if (o.endpoints) c.endpoints = *o.endpoints;
    if (o.horizons) c.horizons = *o.horizons;
    if (o.estimators) c.estimators = *o.estimators;
    if (o.seed) {
        c.seed = *o.seed;
        c.seed_set = true;
    }
    if (o.gbound) c.gbound = *o.gbound;
    if (o.folds) c.sl_folds = *o.folds;
    if (o.library) {
        c.sl_library.clear();
        for (const auto& name : *o.library)
            c.sl_library.push_back(maskrr::LibraryEntry{name, maskrr::Hyperparams{}, std::nullopt});
    }
    if (o.q_loss) c.q_loss = *o.q_loss;
    if (o.g_loss) c.g_loss = *o.g_loss;
    if (o.stratify_q) c.stratify_q = *o.stratify_q;
    if (o.stratify_g) c.stratify_g = *o.stratify_g;
    if (o.screen_alpha) c.screen_alpha = *o.screen_alpha;
    if (o.screen_min_keep) c.screen_min_keep = *o.screen_min_keep;
    if (o.threads) c.threads = *o.threads;
    if (o.serial) c.exec = "serial";
    if (o.exec) c.exec = *o.exec;
    return c;
}

maskrr::DatasetSpec dataset_spec_from(const RunConfig& c, const std::string& endpoint,
                                      int horizon) {
    maskrr::DatasetSpec spec;
    spec.endpoint = endpoint;
    spec.horizon_days = horizon;
    spec.mode = c.mode;
    spec.target_date = maskrr::Date::parse(c.target_date);
    spec.secondary_fallback = maskrr::Date::parse(c.secondary_fallback_date);
    spec.window_end = maskrr::Date::parse(c.window_end);
    spec.exposure_date_field = maskrr::policy_date_field_from_name(c.exposure_date_field);
    for (const auto& [state, date] : c.custom_target_dates)
        spec.custom_targets[state] = maskrr::Date::parse(date);
    return spec;
}

int cmd_validate(const CommonOpts& o) {
    RunConfig c = resolve_config(o);
    if (c.data_dir.empty()) throw maskrr::ConfigError("--data (or config data_dir) is required");
    std::vector<std::string> problems = maskrr::validate_snapshot(c.data_dir);
    if (problems.empty()) {
        std::cout << "snapshot OK: " << c.data_dir << "\n";
        return 0;
    }
    std::cout << problems.size() << " problem(s) in " << c.data_dir << ":\n";
    for (const auto& p : problems) std::cout << "  - " << p << "\n";
    return 2;
}

int cmd_dataset(const CommonOpts& o) {
    RunConfig c = resolve_config(o);
    if (c.data_dir.empty()) throw maskrr::ConfigError("--data (or config data_dir) is required");
    maskrr::Snapshot snap = maskrr::load_snapshot(c.data_dir);
    std::filesystem::create_directories(c.out_dir);
    for (const auto& endpoint : c.endpoints) {
        for (int horizon : c.horizons) {
            maskrr::AnalysisDataset ds =
                maskrr::build_dataset(snap, dataset_spec_from(c, endpoint, horizon));
            std::string tag = endpoint + "_h" + std::to_string(horizon);
            if (c.mode != maskrr::AnalysisMode::Primary)
                tag = maskrr::analysis_mode_name(c.mode) + "_" + tag;
            const std::string csv = c.out_dir + "/dataset_" + tag + ".csv";
            maskrr::write_dataset_csv(ds, csv, c.out_dir + "/dataset_" + tag + ".json");
            std::cout << csv << "  (n=" << ds.n() << ", early=" << static_cast<int>(ds.A.sum())
                      << ")\n";
        }
    }
    return 0;
}

int cmd_estimate(const CommonOpts& o, const std::string& endpoint, int horizon) {
    RunConfig c = resolve_config(o);
    c.endpoints = {endpoint};
    c.horizons = {horizon};
    maskrr::validate_run_config(c);
    maskrr::apply_exec_config(c);
    maskrr::Snapshot snap = maskrr::load_snapshot(c.data_dir);
    maskrr::AnalysisDataset ds = maskrr::build_dataset(snap, dataset_spec_from(c, endpoint, horizon));
    const std::uint64_t seed = maskrr::cell_seed(c.seed, endpoint, horizon);

    nlohmann::json out;
    out["endpoint"] = endpoint;
    out["horizon_days"] = horizon;
    out["n_early"] = static_cast<int>(ds.A.sum());
    out["n_delayed"] = ds.n() - static_cast<int>(ds.A.sum());
    nlohmann::json est = nlohmann::json::object();
    for (const auto& name : c.estimators) {
        maskrr::EffectEstimate e;
        if (name == "tmle")
            e = maskrr::tmle_estimate(ds.W, ds.A, ds.Y,
                                      maskrr::make_q_config(c, maskrr::derive_seed(seed, 1)),
                                      maskrr::make_g_config(c, maskrr::derive_seed(seed, 2)),
                                      c.gbound);
        else if (name == "gcomp")
            e = maskrr::gcomp_estimate(ds.W, ds.A, ds.Y,
                                       maskrr::make_q_config(c, maskrr::derive_seed(seed, 1)));
        else
            e = maskrr::unadjusted_estimate(ds.A, ds.Y);
        nlohmann::json je;
        je["psi1"] = e.psi1;
        je["psi0"] = e.psi0;
        je["rr"] = e.rr;
        je["rr_ci"] = {e.rr_lo, e.rr_hi};
        je["rd"] = e.rd;
        je["rd_ci"] = {e.rd_lo, e.rd_hi};
        je["warnings"] = e.warnings;
        est[name] = je;
    }
    out["estimates"] = est;
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_report(const CommonOpts& o) {
    RunConfig c = resolve_config(o);
    maskrr::PipelineResult r = maskrr::run_pipeline(c);
    std::cout << "wrote " << r.outputs.size() << " files to " << c.out_dir << "\n";
    for (const auto& f : r.outputs) std::cout << "  " << f << "\n";
    return 0;
}

struct SimulateOpts {
    std::string dgp = "confounded_additive";
    std::string scenario = "both_correct";
    int n = 500;
    int replicates = 200;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> estimators = {"tmle", "unadjusted"};
    int folds = 10;
    double gbound = 0.01;
    std::string out_dir;
    int threads = 0;
    bool serial = false;
};

int cmd_simulate(const SimulateOpts& s) {
    if (!s.seed) throw maskrr::ConfigError("--seed is required (no implicit randomness)");
    maskrr::set_exec_mode(s.serial ? maskrr::ExecMode::Serial : maskrr::ExecMode::OpenMP);
    maskrr::set_thread_count(s.threads);

    maskrr::ExperimentConfig config;
    config.dgp = maskrr::dgp_from_name(s.dgp);
    config.scenario = maskrr::scenario_from_name(s.scenario);
    config.n = s.n;
    config.replicates = s.replicates;
    config.seed = *s.seed;
    config.estimators = s.estimators;
    config.K = s.folds;
    config.gbound = s.gbound;

    maskrr::ExperimentReport report = maskrr::run_experiment(config);

    std::cout << "process=" << config.dgp.name << " scenario=" << s.scenario << " n=" << s.n
              << " replicates=" << s.replicates << "\n";
    std::cout << "truth: psi1=" << report.truth.psi1 << " psi0=" << report.truth.psi0
              << " rr=" << report.truth.crr << " rd=" << report.truth.crd << "\n";
    for (const auto& p : report.performance) {
        std::cout << p.estimator << ": bias_rd=" << p.bias_rd << " sd_rd=" << p.sd_rd
                  << " rmse_rd=" << p.rmse_rd << " coverage_rd=" << p.coverage_rd
                  << " coverage_rr=" << p.coverage_rr << " ok=" << p.n_ok << "/"
                  << s.replicates << "\n";
    }

    if (!s.out_dir.empty()) {
        std::filesystem::create_directories(s.out_dir);
        nlohmann::json j;
        j["dgp"] = config.dgp.name;
        j["scenario"] = s.scenario;
        j["n"] = s.n;
        j["replicates"] = s.replicates;
        j["seed"] = *s.seed;
        j["folds"] = s.folds;
        j["gbound"] = s.gbound;
        j["truth"] = {{"psi1", report.truth.psi1},
                      {"psi0", report.truth.psi0},
                      {"rr", report.truth.crr},
                      {"rd", report.truth.crd}};
        nlohmann::json perf = nlohmann::json::object();
        for (const auto& p : report.performance) {
            perf[p.estimator] = {
                {"n_ok", p.n_ok},           {"mean_rd", p.mean_rd},
                {"mean_rr", p.mean_rr},     {"bias_rd", p.bias_rd},
                {"bias_rr", p.bias_rr},     {"sd_rd", p.sd_rd},
                {"sd_rr", p.sd_rr},         {"rmse_rd", p.rmse_rd},
                {"rmse_rr", p.rmse_rr},     {"mean_se_rd", p.mean_se_rd},
                {"coverage_rd", p.coverage_rd}, {"coverage_rr", p.coverage_rr},
                {"width_rd", p.width_rd},   {"width_rr", p.width_rr},
                {"failures", p.failures},
            };
        }
        j["performance"] = perf;
        maskrr::atomic_write_file(s.out_dir + "/simulation_report.json", j.dump(2) + "\n");
        std::cout << "wrote " << s.out_dir << "/simulation_report.json\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"State-level policy effect estimation: datasets, stacked-ensemble "
                 "TMLE estimates, reports, and simulation experiments"};
    app.require_subcommand(1);

    CommonOpts validate_opts, dataset_opts, estimate_opts, report_opts;
    std::string est_endpoint = "cases";
    int est_horizon = 60;
    SimulateOpts sim_opts;

    CLI::App* c_validate = app.add_subcommand("validate", "check a snapshot directory");
    add_common_options(c_validate, &validate_opts);

    CLI::App* c_dataset = app.add_subcommand("dataset", "build and write analysis datasets");
    add_common_options(c_dataset, &dataset_opts);

    CLI::App* c_estimate = app.add_subcommand("estimate", "estimate one endpoint/horizon cell");
    add_common_options(c_estimate, &estimate_opts);
    c_estimate->add_option("--endpoint", est_endpoint, "cases | deaths")->required();
    c_estimate->add_option("--horizon", est_horizon, "horizon in days")->required();

    CLI::App* c_report = app.add_subcommand("report", "run the full pipeline and write reports");
    add_common_options(c_report, &report_opts);

    CLI::App* c_sim = app.add_subcommand("simulate", "repeated-sampling experiment with known truth");
    c_sim->add_option("--dgp", sim_opts.dgp,
                      "randomized_linear | confounded_additive | latent_confounder");
    c_sim->add_option("--scenario", sim_opts.scenario,
                      "both_correct | q_misspecified | g_misspecified | both_misspecified");
    c_sim->add_option("--n", sim_opts.n, "sample size per replicate");
    c_sim->add_option("--replicates", sim_opts.replicates, "number of replicates");
    c_sim->add_option("--seed", sim_opts.seed, "master random seed")->required();
    c_sim->add_option("--estimators", sim_opts.estimators, "estimators to run");
    c_sim->add_option("--folds", sim_opts.folds, "cross-validation folds");
    c_sim->add_option("--gbound", sim_opts.gbound, "propensity truncation bound");
    c_sim->add_option("--out", sim_opts.out_dir, "directory for simulation_report.json");
    c_sim->add_option("--threads", sim_opts.threads, "worker threads (0 = runtime default)");
    c_sim->add_flag("--serial", sim_opts.serial, "run single-threaded");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(c_validate)) return cmd_validate(validate_opts);
        if (app.got_subcommand(c_dataset)) return cmd_dataset(dataset_opts);
        if (app.got_subcommand(c_estimate))
            return cmd_estimate(estimate_opts, est_endpoint, est_horizon);
        if (app.got_subcommand(c_report)) return cmd_report(report_opts);
        if (app.got_subcommand(c_sim)) return cmd_simulate(sim_opts);
    } catch (const maskrr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const maskrr::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const maskrr::EstimationError& e) {
        std::cerr << "estimation error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
