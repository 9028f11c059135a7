#include "maskrr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "maskrr/parallel.hpp"
#include "maskrr/rng.hpp"
#include "maskrr/sha256.hpp"

namespace maskrr {

namespace {

using nlohmann::json;

// ---- config parsing ----

template <typename T>
T get_scalar(const json& j, const std::string& key, const std::string& origin) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": bad value for '" + key + "': " + e.what());
    }
}

void check_known_keys(const json& j, const std::set<std::string>& known,
                      const std::string& origin) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError(origin + ": unknown config key '" + key + "'");
}

ScreenSpec parse_screen(const json& j, const std::string& origin, const ScreenSpec& base) {
    if (!j.is_object()) throw ConfigError(origin + ": screen must be an object");
    check_known_keys(j, {"alpha", "min_keep"}, origin);
    ScreenSpec s = base;
    if (j.contains("alpha")) s.alpha = get_scalar<double>(j, "alpha", origin);
    if (j.contains("min_keep")) s.min_keep = get_scalar<int>(j, "min_keep", origin);
    return s;
}

// Hyperparameter keys accepted per algorithm, mapped onto the flat record.
void apply_hyperparameters(const json& j, const std::string& algorithm, Hyperparams* hp,
                           const std::string& origin) {
    if (!j.is_object()) throw ConfigError(origin + ": hyperparameters must be an object");
    static const std::map<std::string, std::set<std::string>> known = {
        {"mean", {}},
        {"spline", {"interior_knots", "penalty", "irls_max_iter", "irls_tol"}},
        {"tree", {"max_depth", "min_leaf"}},
        {"boost", {"rounds", "depth", "min_leaf", "learning_rate"}},
        {"mars", {"max_terms", "gcv_penalty", "max_knots"}},
    };
    const auto it = known.find(algorithm);
    if (it == known.end()) throw ConfigError(origin + ": unknown algorithm '" + algorithm + "'");
    for (const auto& [key, value] : j.items()) {
        if (!it->second.count(key))
            throw ConfigError(origin + ": '" + key + "' is not a hyperparameter of '" +
                              algorithm + "'");
        if (key == "interior_knots") hp->spline_interior_knots = get_scalar<int>(j, key, origin);
        else if (key == "penalty") hp->spline_penalty = get_scalar<double>(j, key, origin);
        else if (key == "irls_max_iter") hp->irls_max_iter = get_scalar<int>(j, key, origin);
        else if (key == "irls_tol") hp->irls_tol = get_scalar<double>(j, key, origin);
        else if (key == "max_depth") hp->tree_max_depth = get_scalar<int>(j, key, origin);
        else if (key == "min_leaf" && algorithm == "tree")
            hp->tree_min_leaf = get_scalar<int>(j, key, origin);
        else if (key == "rounds") hp->boost_rounds = get_scalar<int>(j, key, origin);
        else if (key == "depth") hp->boost_depth = get_scalar<int>(j, key, origin);
        else if (key == "min_leaf") hp->boost_min_leaf = get_scalar<int>(j, key, origin);
        else if (key == "learning_rate") hp->boost_learning_rate = get_scalar<double>(j, key, origin);
        else if (key == "max_terms") hp->mars_max_terms = get_scalar<int>(j, key, origin);
        else if (key == "gcv_penalty") hp->mars_gcv_penalty = get_scalar<double>(j, key, origin);
        else if (key == "max_knots") hp->mars_max_knots = get_scalar<int>(j, key, origin);
    }
}

std::vector<LibraryEntry> parse_library(const json& j, const std::string& origin) {
    if (!j.is_array()) throw ConfigError(origin + ": library must be an array");
    std::vector<LibraryEntry> lib;
    for (const json& item : j) {
        LibraryEntry e;
        if (item.is_string()) {
            e.algorithm = item.get<std::string>();
        } else if (item.is_object()) {
            check_known_keys(item, {"algorithm", "hyperparameters", "screen"}, origin);
            if (!item.contains("algorithm") || !item.at("algorithm").is_string())
                throw ConfigError(origin + ": library entry needs an 'algorithm' name");
            e.algorithm = item.at("algorithm").get<std::string>();
            if (item.contains("hyperparameters"))
                apply_hyperparameters(item.at("hyperparameters"), e.algorithm, &e.hp,
                                      origin + "." + e.algorithm);
            if (item.contains("screen"))
                e.screen = parse_screen(item.at("screen"), origin + "." + e.algorithm,
                                        ScreenSpec{});
        } else {
            throw ConfigError(origin + ": library entries must be names or objects");
        }
        lib.push_back(std::move(e));
    }
    return lib;
}

json hyperparameters_to_json(const LibraryEntry& e) {
    const Hyperparams& hp = e.hp;
    if (e.algorithm == "spline")
        return {{"interior_knots", hp.spline_interior_knots},
                {"penalty", hp.spline_penalty},
                {"irls_max_iter", hp.irls_max_iter},
                {"irls_tol", hp.irls_tol}};
    if (e.algorithm == "tree")
        return {{"max_depth", hp.tree_max_depth}, {"min_leaf", hp.tree_min_leaf}};
    if (e.algorithm == "boost")
        return {{"rounds", hp.boost_rounds},
                {"depth", hp.boost_depth},
                {"min_leaf", hp.boost_min_leaf},
                {"learning_rate", hp.boost_learning_rate}};
    if (e.algorithm == "mars")
        return {{"max_terms", hp.mars_max_terms},
                {"gcv_penalty", hp.mars_gcv_penalty},
                {"max_knots", hp.mars_max_knots}};
    return json::object();
}

json library_to_json(const std::vector<LibraryEntry>& lib) {
    json arr = json::array();
    for (const auto& e : lib) {
        json item;
        item["algorithm"] = e.algorithm;
        json hp = hyperparameters_to_json(e);
        if (!hp.empty()) item["hyperparameters"] = hp;
        if (e.screen)
            item["screen"] = {{"alpha", e.screen->alpha}, {"min_keep", e.screen->min_keep}};
        arr.push_back(item);
    }
    return arr;
}

}  // namespace

std::vector<LibraryEntry> default_sl_library() {
    return {{"mean", Hyperparams{}, std::nullopt},
            {"spline", Hyperparams{}, std::nullopt},
            {"tree", Hyperparams{}, std::nullopt},
            {"boost", Hyperparams{}, std::nullopt},
            {"mars", Hyperparams{}, std::nullopt}};
}

RunConfig parse_run_config_json(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": config must be a JSON object");

    check_known_keys(j,
                     {"data_dir", "out_dir", "mode", "target_date", "secondary_fallback_date",
                      "window_end", "exposure_date_field", "custom_target_dates", "endpoints",
                      "horizons", "estimators", "seed", "gbound", "super_learner", "exec",
                      "threads"},
                     origin);

    RunConfig c;
    if (j.contains("data_dir")) c.data_dir = get_scalar<std::string>(j, "data_dir", origin);
    if (j.contains("out_dir")) c.out_dir = get_scalar<std::string>(j, "out_dir", origin);
    if (j.contains("mode"))
        c.mode = analysis_mode_from_name(get_scalar<std::string>(j, "mode", origin));
    if (j.contains("target_date"))
        c.target_date = get_scalar<std::string>(j, "target_date", origin);
    if (j.contains("secondary_fallback_date"))
        c.secondary_fallback_date = get_scalar<std::string>(j, "secondary_fallback_date", origin);
    if (j.contains("window_end")) c.window_end = get_scalar<std::string>(j, "window_end", origin);
    if (j.contains("exposure_date_field"))
        c.exposure_date_field = get_scalar<std::string>(j, "exposure_date_field", origin);
    if (j.contains("custom_target_dates")) {
        const json& m = j.at("custom_target_dates");
        if (!m.is_object()) throw ConfigError(origin + ": custom_target_dates must be an object");
        for (const auto& [state, date] : m.items()) {
            if (!date.is_string())
                throw ConfigError(origin + ": custom_target_dates values must be ISO dates");
            c.custom_target_dates[state] = date.get<std::string>();
        }
    }
    if (j.contains("endpoints"))
        c.endpoints = get_scalar<std::vector<std::string>>(j, "endpoints", origin);
    if (j.contains("horizons")) c.horizons = get_scalar<std::vector<int>>(j, "horizons", origin);
    if (j.contains("estimators"))
        c.estimators = get_scalar<std::vector<std::string>>(j, "estimators", origin);
    if (j.contains("seed")) {
        c.seed = get_scalar<std::uint64_t>(j, "seed", origin);
        c.seed_set = true;
    }
    if (j.contains("gbound")) c.gbound = get_scalar<double>(j, "gbound", origin);
    if (j.contains("super_learner")) {
        const json& sl = j.at("super_learner");
        if (!sl.is_object()) throw ConfigError(origin + ": super_learner must be an object");
        check_known_keys(sl,
                         {"folds", "q_loss", "g_loss", "stratify_q", "stratify_g", "library",
                          "library_q", "library_g", "screen"},
                         origin + ".super_learner");
        if (sl.contains("folds")) c.sl_folds = get_scalar<int>(sl, "folds", origin);
        if (sl.contains("q_loss")) c.q_loss = get_scalar<std::string>(sl, "q_loss", origin);
        if (sl.contains("g_loss")) c.g_loss = get_scalar<std::string>(sl, "g_loss", origin);
        if (sl.contains("stratify_q")) c.stratify_q = get_scalar<bool>(sl, "stratify_q", origin);
        if (sl.contains("stratify_g")) c.stratify_g = get_scalar<bool>(sl, "stratify_g", origin);
        if (sl.contains("library"))
            c.sl_library = parse_library(sl.at("library"), origin + ".super_learner.library");
        if (sl.contains("library_q"))
            c.sl_library_q =
                parse_library(sl.at("library_q"), origin + ".super_learner.library_q");
        if (sl.contains("library_g"))
            c.sl_library_g =
                parse_library(sl.at("library_g"), origin + ".super_learner.library_g");
        if (sl.contains("screen")) {
            ScreenSpec s = parse_screen(sl.at("screen"), origin + ".super_learner.screen",
                                        ScreenSpec{c.screen_alpha, c.screen_min_keep, {}});
            c.screen_alpha = s.alpha;
            c.screen_min_keep = s.min_keep;
        }
    }
    if (j.contains("exec")) c.exec = get_scalar<std::string>(j, "exec", origin);
    if (j.contains("threads")) c.threads = get_scalar<int>(j, "threads", origin);
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config_json(buf.str(), path);
}

std::string run_config_to_json(const RunConfig& c) {
    json j;
    j["data_dir"] = c.data_dir;
    j["out_dir"] = c.out_dir;
    j["mode"] = analysis_mode_name(c.mode);
    j["target_date"] = c.target_date;
    j["secondary_fallback_date"] = c.secondary_fallback_date;
    j["window_end"] = c.window_end;
    j["exposure_date_field"] = c.exposure_date_field;
    if (!c.custom_target_dates.empty()) {
        json m = json::object();
        for (const auto& [state, date] : c.custom_target_dates) m[state] = date;
        j["custom_target_dates"] = m;
    }
    j["endpoints"] = c.endpoints;
    j["horizons"] = c.horizons;
    j["estimators"] = c.estimators;
    j["seed"] = c.seed;
    j["gbound"] = c.gbound;
    j["super_learner"] = {
        {"folds", c.sl_folds},
        {"q_loss", c.q_loss},
        {"g_loss", c.g_loss},
        {"stratify_q", c.stratify_q},
        {"stratify_g", c.stratify_g},
        {"library", library_to_json(c.sl_library)},
        {"screen", {{"alpha", c.screen_alpha}, {"min_keep", c.screen_min_keep}}},
    };
    if (!c.sl_library_q.empty())
        j["super_learner"]["library_q"] = library_to_json(c.sl_library_q);
    if (!c.sl_library_g.empty())
        j["super_learner"]["library_g"] = library_to_json(c.sl_library_g);
    j["exec"] = c.exec;
    j["threads"] = c.threads;
    return j.dump(2) + "\n";
}

namespace {

MetaLoss meta_loss_from_name(const std::string& name) {
    if (name == "squared_error") return MetaLoss::SquaredError;
    if (name == "log_loss") return MetaLoss::LogLoss;
    throw ConfigError("loss must be 'squared_error' or 'log_loss', got '" + name + "'");
}

std::vector<LearnerSpec> make_library(const RunConfig& c, Task task) {
    const std::vector<LibraryEntry>& entries =
        task == Task::BinaryProbability
            ? (c.sl_library_g.empty() ? c.sl_library : c.sl_library_g)
            : (c.sl_library_q.empty() ? c.sl_library : c.sl_library_q);
    std::vector<LearnerSpec> lib;
    for (const auto& e : entries) {
        LearnerSpec spec;
        spec.algorithm = algorithm_from_name(e.algorithm);
        spec.task = task;
        spec.hp = e.hp;
        ScreenSpec screen;
        screen.alpha = e.screen ? e.screen->alpha : c.screen_alpha;
        screen.min_keep = e.screen ? e.screen->min_keep : c.screen_min_keep;
        spec.screen = screen;
        lib.push_back(spec);
    }
    return lib;
}

}  // namespace

void validate_run_config(const RunConfig& c) {
    if (c.data_dir.empty()) throw ConfigError("data_dir is required");
    if (c.out_dir.empty()) throw ConfigError("out_dir is required");
    if (!c.seed_set) throw ConfigError("a seed is required (no implicit randomness)");
    if (c.endpoints.empty()) throw ConfigError("endpoints must be non-empty");
    for (const auto& e : c.endpoints)
        if (e != "cases" && e != "deaths")
            throw ConfigError("endpoint must be 'cases' or 'deaths', got '" + e + "'");
    if (c.horizons.empty()) throw ConfigError("horizons must be non-empty");
    for (int h : c.horizons)
        if (h <= 0) throw ConfigError("horizons must be positive");
    if (c.estimators.empty()) throw ConfigError("estimators must be non-empty");
    for (const auto& e : c.estimators)
        if (e != "tmle" && e != "gcomp" && e != "unadjusted")
            throw ConfigError("estimator must be 'tmle', 'gcomp', or 'unadjusted', got '" + e +
                              "'");
    if (!(c.gbound > 0.0 && c.gbound < 0.5)) throw ConfigError("gbound must lie in (0, 0.5)");
    if (c.sl_folds < 2) throw ConfigError("super_learner.folds must be at least 2");
    if (c.sl_library.empty()) throw ConfigError("super_learner.library must be non-empty");
    auto validate_library = [](const std::vector<LibraryEntry>& lib, const std::string& which) {
        for (const auto& e : lib) {
            algorithm_from_name(e.algorithm);  // throws on unknown
            const Hyperparams& hp = e.hp;
            const bool ok = hp.spline_interior_knots >= 0 && hp.spline_penalty >= 0.0 &&
                            hp.irls_max_iter >= 1 && hp.irls_tol > 0.0 &&
                            hp.tree_max_depth >= 1 && hp.tree_min_leaf >= 1 &&
                            hp.boost_rounds >= 1 && hp.boost_depth >= 1 &&
                            hp.boost_min_leaf >= 1 && hp.boost_learning_rate > 0.0 &&
                            hp.boost_learning_rate <= 1.0 && hp.mars_max_terms >= 1 &&
                            hp.mars_gcv_penalty >= 0.0 && hp.mars_max_knots >= 1;
            if (!ok)
                throw ConfigError(which + ": hyperparameters out of range for '" + e.algorithm +
                                  "'");
            if (e.screen) {
                if (!(e.screen->alpha > 0.0 && e.screen->alpha < 1.0))
                    throw ConfigError(which + ": screen.alpha must lie in (0, 1)");
                if (e.screen->min_keep < 1)
                    throw ConfigError(which + ": screen.min_keep must be at least 1");
            }
        }
    };
    validate_library(c.sl_library, "super_learner.library");
    validate_library(c.sl_library_q, "super_learner.library_q");
    validate_library(c.sl_library_g, "super_learner.library_g");
    if (!(c.screen_alpha > 0.0 && c.screen_alpha < 1.0))
        throw ConfigError("screen.alpha must lie in (0, 1)");
    if (c.screen_min_keep < 1) throw ConfigError("screen.min_keep must be at least 1");
    meta_loss_from_name(c.q_loss);
    meta_loss_from_name(c.g_loss);
    if (c.exec != "openmp" && c.exec != "serial")
        throw ConfigError("exec must be 'openmp' or 'serial', got '" + c.exec + "'");
    if (c.threads < 0) throw ConfigError("threads must be >= 0");
    policy_date_field_from_name(c.exposure_date_field);
    Date::parse(c.target_date);
    Date::parse(c.secondary_fallback_date);
    Date::parse(c.window_end);
    if (c.mode == AnalysisMode::Custom && c.custom_target_dates.empty())
        throw ConfigError("custom mode requires custom_target_dates");
    for (const auto& [state, date] : c.custom_target_dates) Date::parse(date);
}

void apply_exec_config(const RunConfig& c) {
    set_exec_mode(c.exec == "serial" ? ExecMode::Serial : ExecMode::OpenMP);
    set_thread_count(c.threads);
}

SuperLearnerConfig make_q_config(const RunConfig& c, std::uint64_t seed) {
    SuperLearnerConfig q;
    q.library = make_library(c, Task::RegressionOnUnit);
    q.K = c.sl_folds;
    q.loss = meta_loss_from_name(c.q_loss);
    q.stratify = c.stratify_q;
    q.seed = seed;
    return q;
}

SuperLearnerConfig make_g_config(const RunConfig& c, std::uint64_t seed) {
    SuperLearnerConfig g;
    g.library = make_library(c, Task::BinaryProbability);
    g.K = c.sl_folds;
    g.loss = meta_loss_from_name(c.g_loss);
    g.stratify = c.stratify_g;
    g.seed = seed;
    return g;
}

std::uint64_t cell_seed(std::uint64_t master, const std::string& endpoint, int horizon) {
    const std::uint64_t endpoint_tag = endpoint == "cases" ? 1 : 2;
    return derive_seed(derive_seed(master, endpoint_tag), static_cast<std::uint64_t>(horizon));
}

// ---------------------------------------------------------------------------
// Report writing
// ---------------------------------------------------------------------------

namespace {

namespace fs = std::filesystem;

// One decimal, with a trailing ".0" trimmed ("7.0" -> "7", "3.2" -> "3.2").
std::string format_descriptive(double x) {
    std::string s = format_fixed(x, 1);
    if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.erase(s.size() - 2);
    return s;
}

std::string dataset_tag(const RunConfig& c, const std::string& endpoint, int horizon) {
    std::string tag;
    if (c.mode != AnalysisMode::Primary) tag += analysis_mode_name(c.mode) + "_";
    tag += endpoint + "_h" + std::to_string(horizon);
    return tag;
}

struct OutputWriter {
    std::string dir;
    std::vector<std::string> written;

    std::string path(const std::string& name) const { return dir + "/" + name; }

    void csv(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<std::string>>& rows) {
        write_csv(path(name), header, rows);
        written.push_back(name);
    }

    void text(const std::string& name, const std::string& content) {
        atomic_write_file(path(name), content);
        written.push_back(name);
    }
};

void write_table1(OutputWriter* out, const std::vector<Table1Row>& rows) {
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) {
        auto cell = [&](double a, double b, double c) -> std::vector<std::string> {
            if (r.indicator)
                return {format_descriptive(a), format_descriptive(b), ""};
            return {format_descriptive(a), format_descriptive(b), format_descriptive(c)};
        };
        std::vector<std::string> row = {r.section, r.label,
                                        r.indicator ? "count_pct" : "median_q25_q75"};
        for (const auto& v : cell(r.overall_a, r.overall_b, r.overall_c)) row.push_back(v);
        for (const auto& v : cell(r.early_a, r.early_b, r.early_c)) row.push_back(v);
        for (const auto& v : cell(r.delayed_a, r.delayed_b, r.delayed_c)) row.push_back(v);
        body.push_back(std::move(row));
    }
    out->csv("table1.csv",
             {"section", "characteristic", "kind", "all_mid", "all_lo", "all_hi", "early_mid",
              "early_lo", "early_hi", "delayed_mid", "delayed_lo", "delayed_hi"},
             body);
}

std::vector<std::string> effect_row(const std::string& first, int horizon,
                                    const EffectEstimate& e) {
    auto f2 = [](double x) { return format_fixed(x, 2); };
    return {first,          std::to_string(horizon), f2(e.psi1),  f2(e.psi1_lo), f2(e.psi1_hi),
            f2(e.psi0),     f2(e.psi0_lo),           f2(e.psi0_hi), f2(e.rr),    f2(e.rr_lo),
            f2(e.rr_hi),    f2(e.rd),                f2(e.rd_lo), f2(e.rd_hi)};
}

const std::vector<std::string> kEffectHeader = {
    "estimator", "horizon_days", "psi1", "psi1_lo", "psi1_hi", "psi0", "psi0_lo",
    "psi0_hi",   "rr",           "rr_lo", "rr_hi",  "rd",      "rd_lo", "rd_hi"};

json sl_summary_to_json(const SlSummary& s) {
    json j;
    j["learners"] = s.learners;
    j["weights"] = std::vector<double>(s.weights.data(), s.weights.data() + s.weights.size());
    j["cv_risk"] = std::vector<double>(s.cv_risk.data(), s.cv_risk.data() + s.cv_risk.size());
    j["cv_risk_combined"] = s.cv_risk_combined;
    return j;
}

json estimate_to_json(const EffectEstimate& e) {
    json j;
    j["estimator"] = e.estimator;
    j["psi1"] = e.psi1;
    j["psi0"] = e.psi0;
    j["rr"] = e.rr;
    j["rd"] = e.rd;
    j["psi1_ci"] = {e.psi1_lo, e.psi1_hi};
    j["psi0_ci"] = {e.psi0_lo, e.psi0_hi};
    j["rr_ci"] = {e.rr_lo, e.rr_hi};
    j["rd_ci"] = {e.rd_lo, e.rd_hi};
    j["se_psi1"] = e.se_psi1;
    j["se_psi0"] = e.se_psi0;
    j["se_rd"] = e.se_rd;
    j["se_log_rr"] = e.se_log_rr;
    j["outcome_bounds"] = {e.bounds.lo, e.bounds.hi};
    j["epsilon"] = {{"arm0", e.eps0}, {"arm1", e.eps1}};
    j["score"] = {{"arm0", e.score0}, {"arm1", e.score1}};
    j["mean_ic"] = {{"arm0", e.mean_ic0}, {"arm1", e.mean_ic1}};
    if (e.g1.size() > 0) {
        j["propensity_summary"] = {{"min", e.g_summary.min},     {"q1", e.g_summary.q1},
                                   {"median", e.g_summary.median}, {"mean", e.g_summary.mean},
                                   {"q3", e.g_summary.q3},       {"max", e.g_summary.max}};
    }
    if (!e.q_sl.learners.empty()) j["q_sl"] = sl_summary_to_json(e.q_sl);
    if (!e.g_sl.learners.empty()) j["g_sl"] = sl_summary_to_json(e.g_sl);
    j["warnings"] = e.warnings;
    return j;
}

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

template <typename Fn>
auto with_cell_context(const std::string& endpoint, int horizon, Fn&& fn) {
    const std::string tag =
        " [cell endpoint=" + endpoint + ", horizon=" + std::to_string(horizon) + "]";
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + tag);
    } catch (const DataError& e) {
        throw DataError(std::string(e.what()) + tag);
    } catch (const EstimationError& e) {
        throw EstimationError(std::string(e.what()) + tag);
    }
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config) {
    validate_run_config(config);
    apply_exec_config(config);

    PipelineResult result;
    result.config = config;

    Snapshot snap = load_snapshot(config.data_dir);

    fs::create_directories(config.out_dir);
    OutputWriter out{config.out_dir, {}};

    DatasetSpec base_spec;
    base_spec.mode = config.mode;
    base_spec.target_date = Date::parse(config.target_date);
    base_spec.secondary_fallback = Date::parse(config.secondary_fallback_date);
    base_spec.window_end = Date::parse(config.window_end);
    base_spec.exposure_date_field = policy_date_field_from_name(config.exposure_date_field);
    for (const auto& [state, date] : config.custom_target_dates)
        base_spec.custom_targets[state] = Date::parse(date);

    // ---- build and estimate every cell ----
    for (const auto& endpoint : config.endpoints) {
        for (int horizon : config.horizons) {
            CellResult cell;
            cell.endpoint = endpoint;
            cell.horizon_days = horizon;
            cell.seed = cell_seed(config.seed, endpoint, horizon);
            with_cell_context(endpoint, horizon, [&] {
                DatasetSpec spec = base_spec;
                spec.endpoint = endpoint;
                spec.horizon_days = horizon;
                cell.dataset = build_dataset(snap, spec);

                const std::string tag = dataset_tag(config, endpoint, horizon);
                write_dataset_csv(cell.dataset, out.path("dataset_" + tag + ".csv"),
                                  out.path("dataset_" + tag + ".json"));
                out.written.push_back("dataset_" + tag + ".csv");
                out.written.push_back("dataset_" + tag + ".json");

                for (const auto& estimator : config.estimators) {
                    if (estimator == "tmle") {
                        cell.estimates["tmle"] = tmle_estimate(
                            cell.dataset.W, cell.dataset.A, cell.dataset.Y,
                            make_q_config(config, derive_seed(cell.seed, 1)),
                            make_g_config(config, derive_seed(cell.seed, 2)), config.gbound);
                    } else if (estimator == "gcomp") {
                        cell.estimates["gcomp"] =
                            gcomp_estimate(cell.dataset.W, cell.dataset.A, cell.dataset.Y,
                                           make_q_config(config, derive_seed(cell.seed, 1)));
                    } else {
                        cell.estimates["unadjusted"] =
                            unadjusted_estimate(cell.dataset.A, cell.dataset.Y);
                    }
                }
            });
            result.cells.push_back(std::move(cell));
        }
    }

    auto cells_for = [&](const std::string& endpoint) {
        std::vector<const CellResult*> v;
        for (const auto& c : result.cells)
            if (c.endpoint == endpoint) v.push_back(&c);
        return v;
    };
    const bool has_tmle =
        std::find(config.estimators.begin(), config.estimators.end(), "tmle") !=
        config.estimators.end();
    const bool has_unadjusted =
        std::find(config.estimators.begin(), config.estimators.end(), "unadjusted") !=
        config.estimators.end();

    // ---- descriptive summary (primary mode) ----
    if (config.mode == AnalysisMode::Primary && !result.cells.empty()) {
        result.table1 = summarize_table1(result.cells.front().dataset);
        write_table1(&out, result.table1);
    }

    // ---- adjusted-estimate table (primary mode) ----
    if (config.mode == AnalysisMode::Primary && has_tmle) {
        std::vector<std::vector<std::string>> body;
        for (const auto& endpoint : config.endpoints)
            for (const CellResult* c : cells_for(endpoint))
                body.push_back(effect_row(endpoint, c->horizon_days, c->estimates.at("tmle")));
        std::vector<std::string> header = kEffectHeader;
        header[0] = "endpoint";
        out.csv("table2.csv", header, body);
    }

    // ---- adjusted vs unadjusted tables ----
    auto write_effect_pair = [&](const std::string& name, const std::string& endpoint) {
        std::vector<std::vector<std::string>> body;
        if (has_tmle)
            for (const CellResult* c : cells_for(endpoint))
                body.push_back(effect_row("tmle", c->horizon_days, c->estimates.at("tmle")));
        if (has_unadjusted)
            for (const CellResult* c : cells_for(endpoint))
                body.push_back(
                    effect_row("unadjusted", c->horizon_days, c->estimates.at("unadjusted")));
        out.csv(name, kEffectHeader, body);
    };
    if (has_tmle || has_unadjusted) {
        for (const auto& endpoint : config.endpoints) {
            const bool cases = endpoint == "cases";
            if (config.mode == AnalysisMode::Primary)
                write_effect_pair(cases ? "etable1a.csv" : "etable1b.csv", endpoint);
            else if (config.mode == AnalysisMode::Secondary)
                write_effect_pair(cases ? "etable2a.csv" : "etable2b.csv", endpoint);
            else
                write_effect_pair("effects_" + endpoint + ".csv", endpoint);
        }
    }

    // ---- propensity six-number summaries (primary mode) ----
    if (config.mode == AnalysisMode::Primary && has_tmle) {
        std::vector<std::vector<std::string>> body;
        auto f3 = [](double x) { return format_fixed(x, 3); };
        for (const auto& endpoint : config.endpoints)
            for (const CellResult* c : cells_for(endpoint)) {
                const SixNumber& s = c->estimates.at("tmle").g_summary;
                body.push_back({endpoint, std::to_string(c->horizon_days), f3(s.min), f3(s.q1),
                                f3(s.median), f3(s.mean), f3(s.q3), f3(s.max)});
            }
        out.csv("etable3.csv",
                {"endpoint", "horizon_days", "min", "q1", "median", "mean", "q3", "max"}, body);
    }

    // ---- full-precision ratio series (the plot-source data) ----
    if (has_tmle) {
        std::vector<std::vector<std::string>> body;
        for (const auto& endpoint : config.endpoints)
            for (const CellResult* c : cells_for(endpoint)) {
                const EffectEstimate& e = c->estimates.at("tmle");
                body.push_back({endpoint, std::to_string(c->horizon_days), format_double(e.rr),
                                format_double(e.rr_lo), format_double(e.rr_hi)});
            }
        out.csv("figure2_series.csv", {"endpoint", "horizon_days", "rr", "rr_lo", "rr_hi"}, body);
    }

    // ---- full-precision estimates + diagnostics ----
    {
        json cells = json::array();
        for (const auto& c : result.cells) {
            json jc;
            jc["endpoint"] = c.endpoint;
            jc["horizon_days"] = c.horizon_days;
            jc["seed"] = c.seed;
            jc["n_early"] = static_cast<int>(c.dataset.A.sum());
            jc["n_delayed"] = c.dataset.n() - static_cast<int>(c.dataset.A.sum());
            json est = json::object();
            for (const auto& [name, e] : c.estimates) est[name] = estimate_to_json(e);
            jc["estimates"] = est;
            cells.push_back(jc);
        }
        json root;
        root["cells"] = cells;
        out.text("estimates.json", root.dump(2) + "\n");
    }

    // ---- run manifest ----
    {
        json manifest;
        manifest["version"] = kVersion;
        manifest["generated_at"] = iso8601_now();
        manifest["config"] = json::parse(run_config_to_json(config));
        json inputs = json::object();
        for (const auto& [file, checksum] : snap.file_checksums) inputs[file] = checksum;
        manifest["inputs"] = inputs;
        json seeds = json::object();
        seeds["master"] = config.seed;
        json cell_seeds = json::object();
        for (const auto& c : result.cells)
            cell_seeds[c.endpoint + "_h" + std::to_string(c.horizon_days)] = c.seed;
        seeds["cells"] = cell_seeds;
        manifest["seeds"] = seeds;
        if (config.mode == AnalysisMode::Secondary)
            manifest["notes"] = {
                {"outcome_anchoring", "horizons are anchored per state at its own target date"}};
        std::sort(out.written.begin(), out.written.end());
        json outputs = json::object();
        for (const auto& name : out.written) outputs[name] = sha256_file(out.path(name));
        manifest["outputs"] = outputs;
        out.text("run_manifest.json", manifest.dump(2) + "\n");
    }

    result.outputs = out.written;
    return result;
}

}  // namespace maskrr
