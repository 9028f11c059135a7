#include "maskrr/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "maskrr/sha256.hpp"
#include "maskrr/stats.hpp"

namespace maskrr {

namespace {

// The 50 US states (two-letter postal codes), sorted.
const std::vector<std::string> kUsStates = {
    "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DE", "FL", "GA",
    "HI", "IA", "ID", "IL", "IN", "KS", "KY", "LA", "MA", "MD",
    "ME", "MI", "MN", "MO", "MS", "MT", "NC", "ND", "NE", "NH",
    "NJ", "NM", "NV", "NY", "OH", "OK", "OR", "PA", "RI", "SC",
    "SD", "TN", "TX", "UT", "VA", "VT", "WA", "WI", "WV", "WY"};

// Static covariate columns, in adjustment-set order. "urbanicity" is read
// from the same file but kept out of the adjustment set (descriptive only).
const std::vector<std::string> kStaticColumns = {
    "pct_over_65",
    "pct_black",
    "pct_hispanic",
    "pct_asian",
    "pct_mixed_race",
    "pct_caucasian",
    "median_age",
    "pct_household_below_poverty",
    "pct_people_below_poverty",
    "pct_smoker",
    "pct_diabetic",
    "population_density",
    "pct_commute_drive",
    "pct_commute_work_home",
    "pct_commute_transit",
    "pct_commute_bike",
    "pct_commute_walk",
    "pct_commute_other",
    "total_population",
    "republican",
};

const std::vector<std::pair<PolicyKind, std::string>> kPolicyKindNames = {
    {PolicyKind::PublicMasking, "public_masking"},
    {PolicyKind::BusinessMasking, "business_masking"},
    {PolicyKind::SchoolMasking, "school_masking"},
    {PolicyKind::StayAtHome, "stay_at_home"},
    {PolicyKind::GatheringRestriction, "gathering_restriction"},
    {PolicyKind::RestaurantRestriction, "restaurant_restriction"},
    {PolicyKind::BusinessClosureNonessential, "business_closure_nonessential"},
    {PolicyKind::BusinessClosureOther, "business_closure_other"},
};

// Ever-implemented indicator columns, paired with their policy kind, in
// adjustment-set order.
const std::vector<std::pair<std::string, PolicyKind>> kEverColumns = {
    {"ever_stay_at_home", PolicyKind::StayAtHome},
    {"ever_gathering_restriction", PolicyKind::GatheringRestriction},
    {"ever_restaurant_restriction", PolicyKind::RestaurantRestriction},
    {"ever_business_closure_nonessential", PolicyKind::BusinessClosureNonessential},
    {"ever_business_closure_other", PolicyKind::BusinessClosureOther},
    {"ever_business_masking", PolicyKind::BusinessMasking},
    {"ever_school_masking", PolicyKind::SchoolMasking},
};

std::optional<Date> parse_optional_date(const std::string& s, const std::string& context,
                                        std::vector<std::string>* problems) {
    if (s.empty()) return std::nullopt;
    try {
        return Date::parse(s);
    } catch (const DataError& e) {
        problems->push_back(context + ": " + e.what());
        return std::nullopt;
    }
}

void load_panel(const std::string& dir, Snapshot* snap, std::vector<std::string>* problems) {
    const std::string path = dir + "/panel.csv";
    CsvTable t;
    try {
        t = read_csv(path);
    } catch (const DataError& e) {
        problems->push_back(e.what());
        return;
    }
    const std::vector<std::string> expect = {"state",     "date",      "cum_cases",
                                             "cum_deaths", "cum_tests", "mobility_residential_pct"};
    if (t.header != expect) {
        problems->push_back(path + ": unexpected header (want state,date,cum_cases,cum_deaths," +
                            "cum_tests,mobility_residential_pct)");
        return;
    }
    struct Row {
        Date date;
        long long cases, deaths, tests;
        double mobility;
    };
    std::map<std::string, std::vector<Row>> by_state;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string ctx = path + ":" + std::to_string(i + 2);
        const std::string& state = t.at(i, 0);
        try {
            Row r{Date::parse(t.at(i, 1)), parse_int(t.at(i, 2), ctx), parse_int(t.at(i, 3), ctx),
                  parse_int(t.at(i, 4), ctx), parse_double(t.at(i, 5), ctx)};
            by_state[state].push_back(r);
        } catch (const DataError& e) {
            problems->push_back(e.what());
            return;
        }
    }
    for (auto& [state, rows] : by_state) {
        if (std::find(kUsStates.begin(), kUsStates.end(), state) == kUsStates.end()) {
            problems->push_back(path + ": unknown state code '" + state + "'");
            continue;
        }
        StatePanel p;
        p.state = state;
        p.start = rows.front().date;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Row& r = rows[i];
            if (r.date != p.start.plus_days(static_cast<int>(i))) {
                problems->push_back(path + ": state " + state + " has a gap or disorder at " +
                                    r.date.iso() + " (daily rows must be contiguous and sorted)");
                break;
            }
            if (r.cases < 0 || r.deaths < 0 || r.tests < 0) {
                problems->push_back(path + ": state " + state + " has a negative count at " +
                                    r.date.iso());
                break;
            }
            if (i > 0 && (r.cases < rows[i - 1].cases || r.deaths < rows[i - 1].deaths ||
                          r.tests < rows[i - 1].tests)) {
                problems->push_back(path + ": state " + state +
                                    " has a decreasing cumulative series at " + r.date.iso());
                break;
            }
            p.cum_cases.push_back(r.cases);
            p.cum_deaths.push_back(r.deaths);
            p.cum_tests.push_back(r.tests);
            p.mobility_residential.push_back(r.mobility);
        }
        if (p.size() == static_cast<int>(rows.size())) snap->panels[state] = std::move(p);
    }
    for (const auto& s : kUsStates)
        if (!snap->panels.count(s)) problems->push_back(path + ": missing state " + s);
}

void load_policies(const std::string& dir, Snapshot* snap, std::vector<std::string>* problems) {
    const std::string path = dir + "/policies.csv";
    CsvTable t;
    try {
        t = read_csv(path);
    } catch (const DataError& e) {
        problems->push_back(e.what());
        return;
    }
    const std::vector<std::string> expect = {"state",   "kind",    "mask_level", "issued",
                                             "enacted", "expired", "end"};
    if (t.header != expect) {
        problems->push_back(path +
                            ": unexpected header (want state,kind,mask_level,issued,enacted," +
                            "expired,end)");
        return;
    }
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string ctx = path + ":" + std::to_string(i + 2);
        PolicyRecord rec;
        rec.state = t.at(i, 0);
        if (std::find(kUsStates.begin(), kUsStates.end(), rec.state) == kUsStates.end()) {
            problems->push_back(ctx + ": unknown state code '" + rec.state + "'");
            continue;
        }
        try {
            rec.kind = policy_kind_from_name(t.at(i, 1));
        } catch (const DataError& e) {
            problems->push_back(ctx + ": " + e.what());
            continue;
        }
        const std::string& level = t.at(i, 2);
        if (is_masking_kind(rec.kind)) {
            if (level.empty()) {
                problems->push_back(ctx + ": masking policy without a mask_level");
                continue;
            }
            long long lv = 0;
            try {
                lv = parse_int(level, ctx);
            } catch (const DataError& e) {
                problems->push_back(e.what());
                continue;
            }
            if (lv < 1 || lv > 3) {
                problems->push_back(ctx + ": mask_level must be 1, 2, or 3");
                continue;
            }
            rec.mask_level = static_cast<int>(lv);
        } else if (!level.empty()) {
            problems->push_back(ctx + ": mask_level given for a non-masking policy");
            continue;
        }
        rec.issued = parse_optional_date(t.at(i, 3), ctx, problems);
        rec.enacted = parse_optional_date(t.at(i, 4), ctx, problems);
        rec.expired = parse_optional_date(t.at(i, 5), ctx, problems);
        rec.end = parse_optional_date(t.at(i, 6), ctx, problems);
        if (rec.issued && rec.enacted && *rec.enacted < *rec.issued) {
            problems->push_back(ctx + ": enacted date precedes issued date");
            continue;
        }
        if (rec.enacted && rec.effective_end() && *rec.effective_end() < *rec.enacted) {
            problems->push_back(ctx + ": policy ends before it is enacted");
            continue;
        }
        if (!rec.enacted && !rec.issued) {
            problems->push_back(ctx + ": record has neither an issued nor an enacted date");
            continue;
        }
        // The exposure contract requires mandates that are in place by a date
        // to stay in place at any later date; a strictest-level public masking
        // record with an end date would break that monotonicity.
        if (rec.kind == PolicyKind::PublicMasking && rec.mask_level == 3 &&
            rec.effective_end()) {
            problems->push_back(ctx +
                                ": strictest public masking record carries an end date; "
                                "exposure would not be monotone in the target date");
            continue;
        }
        snap->policies.push_back(std::move(rec));
    }
}

void load_static(const std::string& dir, Snapshot* snap, std::vector<std::string>* problems) {
    const std::string path = dir + "/static_covariates.csv";
    CsvTable t;
    try {
        t = read_csv(path);
    } catch (const DataError& e) {
        problems->push_back(e.what());
        return;
    }
    if (t.header.empty() || t.header[0] != "state") {
        problems->push_back(path + ": first column must be 'state'");
        return;
    }
    std::vector<std::string> want = kStaticColumns;
    want.push_back("urbanicity");
    std::vector<std::string> have(t.header.begin() + 1, t.header.end());
    {
        auto sorted_want = want, sorted_have = have;
        std::sort(sorted_want.begin(), sorted_want.end());
        std::sort(sorted_have.begin(), sorted_have.end());
        if (sorted_want != sorted_have) {
            problems->push_back(path + ": covariate columns do not match the expected set of " +
                                std::to_string(want.size()) + " columns");
            return;
        }
    }
    snap->static_columns = have;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string ctx = path + ":" + std::to_string(i + 2);
        const std::string& state = t.at(i, 0);
        if (std::find(kUsStates.begin(), kUsStates.end(), state) == kUsStates.end()) {
            problems->push_back(ctx + ": unknown state code '" + state + "'");
            continue;
        }
        if (snap->static_covariates.count(state)) {
            problems->push_back(ctx + ": duplicate state " + state);
            continue;
        }
        std::map<std::string, double> row;
        bool ok = true;
        for (std::size_t j = 1; j < t.header.size(); ++j) {
            double v;
            try {
                v = parse_double(t.at(i, static_cast<int>(j)), ctx);
            } catch (const DataError& e) {
                problems->push_back(e.what());
                ok = false;
                break;
            }
            const std::string& name = t.header[j];
            if (!std::isfinite(v)) {
                problems->push_back(ctx + ": non-finite value in column " + name);
                ok = false;
                break;
            }
            if ((name.rfind("pct_", 0) == 0 || name == "urbanicity") && (v < 0.0 || v > 100.0)) {
                problems->push_back(ctx + ": percentage column " + name + " outside [0,100]");
                ok = false;
                break;
            }
            if (name == "republican" && v != 0.0 && v != 1.0) {
                problems->push_back(ctx + ": republican must be 0 or 1");
                ok = false;
                break;
            }
            if ((name == "total_population" || name == "population_density") && v <= 0.0) {
                problems->push_back(ctx + ": " + name + " must be positive");
                ok = false;
                break;
            }
            row[name] = v;
        }
        if (ok) snap->static_covariates[state] = std::move(row);
    }
    for (const auto& s : kUsStates)
        if (!snap->static_covariates.count(s)) problems->push_back(path + ": missing state " + s);
}

Snapshot load_snapshot_impl(const std::string& dir, std::vector<std::string>* problems) {
    Snapshot snap;
    snap.states = kUsStates;
    if (!std::filesystem::is_directory(dir)) {
        problems->push_back("snapshot directory not found: " + dir);
        return snap;
    }
    load_panel(dir, &snap, problems);
    load_policies(dir, &snap, problems);
    load_static(dir, &snap, problems);
    if (problems->empty()) {
        // Populate panel populations from the static table.
        for (auto& [state, panel] : snap.panels)
            panel.population = snap.static_covariates.at(state).at("total_population");
        for (const char* f : {"panel.csv", "policies.csv", "static_covariates.csv"})
            snap.file_checksums[f] = sha256_file(dir + "/" + std::string(f));
    }
    return snap;
}

// Strictest-level public masking records for one state.
std::vector<const PolicyRecord*> level3_masking(const std::vector<PolicyRecord>& policies,
                                                const std::string& state) {
    std::vector<const PolicyRecord*> out;
    for (const auto& r : policies)
        if (r.state == state && r.kind == PolicyKind::PublicMasking && r.mask_level == 3)
            out.push_back(&r);
    return out;
}

std::optional<Date> record_date(const PolicyRecord& rec, PolicyDateField field) {
    return field == PolicyDateField::Enacted ? rec.enacted : rec.issued;
}

}  // namespace

int StatePanel::index_of(const Date& d) const {
    if (!covers(d))
        throw DataError("state " + state + ": date " + d.iso() + " outside panel coverage [" +
                        start.iso() + ", " + last_date().iso() + "]");
    return d - start;
}

std::optional<Date> PolicyRecord::effective_end() const {
    if (expired && end) return std::min(*expired, *end);
    if (expired) return expired;
    return end;
}

std::string policy_kind_name(PolicyKind kind) {
    for (const auto& [k, name] : kPolicyKindNames)
        if (k == kind) return name;
    throw ConfigError("unknown policy kind");
}

PolicyKind policy_kind_from_name(const std::string& name) {
    for (const auto& [k, n] : kPolicyKindNames)
        if (n == name) return k;
    throw DataError("unknown policy kind: '" + name + "'");
}

bool is_masking_kind(PolicyKind kind) {
    return kind == PolicyKind::PublicMasking || kind == PolicyKind::BusinessMasking ||
           kind == PolicyKind::SchoolMasking;
}

PolicyDateField policy_date_field_from_name(const std::string& name) {
    if (name == "enacted") return PolicyDateField::Enacted;
    if (name == "issued") return PolicyDateField::Issued;
    throw ConfigError("exposure date field must be 'enacted' or 'issued', got '" + name + "'");
}

std::string policy_date_field_name(PolicyDateField f) {
    return f == PolicyDateField::Enacted ? "enacted" : "issued";
}

std::string exposure_class_name(ExposureClass c) {
    switch (c) {
        case ExposureClass::Early: return "early";
        case ExposureClass::LateLevel3: return "late_level3";
        case ExposureClass::WeakerOnly: return "weaker_only";
        case ExposureClass::Never: return "never";
    }
    throw ConfigError("unknown exposure class");
}

std::string analysis_mode_name(AnalysisMode m) {
    switch (m) {
        case AnalysisMode::Primary: return "primary";
        case AnalysisMode::Secondary: return "secondary";
        case AnalysisMode::Custom: return "custom";
    }
    throw ConfigError("unknown analysis mode");
}

AnalysisMode analysis_mode_from_name(const std::string& name) {
    if (name == "primary") return AnalysisMode::Primary;
    if (name == "secondary") return AnalysisMode::Secondary;
    if (name == "custom") return AnalysisMode::Custom;
    throw ConfigError("analysis mode must be 'primary', 'secondary', or 'custom', got '" + name +
                      "'");
}

Snapshot load_snapshot(const std::string& dir) {
    std::vector<std::string> problems;
    Snapshot snap = load_snapshot_impl(dir, &problems);
    if (!problems.empty()) {
        std::ostringstream msg;
        msg << "snapshot '" << dir << "' failed validation (" << problems.size() << " problems):";
        for (const auto& p : problems) msg << "\n  - " << p;
        throw DataError(msg.str());
    }
    return snap;
}

std::vector<std::string> validate_snapshot(const std::string& dir) {
    std::vector<std::string> problems;
    load_snapshot_impl(dir, &problems);
    return problems;
}

bool policy_in_place(const PolicyRecord& rec, const Date& d, PolicyDateField field) {
    std::optional<Date> from = record_date(rec, field);
    if (!from) return false;
    if (*from > d) return false;
    std::optional<Date> until = rec.effective_end();
    return !until || *until >= d;
}

Eigen::VectorXd build_exposure(const std::vector<PolicyRecord>& policies,
                               const std::vector<std::string>& states,
                               const std::vector<Date>& target_dates, PolicyDateField field) {
    if (states.size() != target_dates.size())
        throw DataError("build_exposure: one target date per state is required");
    Eigen::VectorXd a(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        bool in_place = false;
        for (const PolicyRecord* rec : level3_masking(policies, states[i]))
            if (policy_in_place(*rec, target_dates[i], field)) in_place = true;
        a[static_cast<Eigen::Index>(i)] = in_place ? 1.0 : 0.0;
    }
    return a;
}

std::vector<ExposureClass> classify_exposure(const std::vector<PolicyRecord>& policies,
                                             const std::vector<std::string>& states,
                                             const std::vector<Date>& target_dates,
                                             PolicyDateField field) {
    Eigen::VectorXd a = build_exposure(policies, states, target_dates, field);
    std::vector<ExposureClass> out(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (a[static_cast<Eigen::Index>(i)] == 1.0) {
            out[i] = ExposureClass::Early;
            continue;
        }
        bool has_level3 = !level3_masking(policies, states[i]).empty();
        bool has_any_masking = false;
        for (const auto& r : policies)
            if (r.state == states[i] && r.kind == PolicyKind::PublicMasking)
                has_any_masking = true;
        if (has_level3)
            out[i] = ExposureClass::LateLevel3;
        else if (has_any_masking)
            out[i] = ExposureClass::WeakerOnly;
        else
            out[i] = ExposureClass::Never;
    }
    return out;
}

SecondaryTargets secondary_target_dates(const std::vector<PolicyRecord>& policies,
                                        const std::vector<std::string>& states,
                                        const Date& fallback, const Date& window_end) {
    SecondaryTargets out;
    out.dates.reserve(states.size());
    for (const auto& state : states) {
        std::vector<const PolicyRecord*> orders;
        for (const auto& r : policies)
            if (r.state == state && r.kind == PolicyKind::StayAtHome) orders.push_back(&r);
        if (orders.empty()) {
            out.dates.push_back(fallback);
            out.used_fallback.push_back(state);
            continue;
        }
        // A state's stay-at-home phase ends when its last order terminates.
        bool open_ended = false;
        Date latest = Date::from_days(0);
        bool have = false;
        for (const PolicyRecord* r : orders) {
            std::optional<Date> t = r->effective_end();
            if (!t) {
                open_ended = true;
            } else if (!have || *t > latest) {
                latest = *t;
                have = true;
            }
        }
        if (open_ended || !have) {
            out.dates.push_back(window_end);
            out.used_window_end.push_back(state);
        } else {
            out.dates.push_back(latest);
        }
    }
    return out;
}

double build_outcome(const StatePanel& panel, const Date& target_date, int horizon_days,
                     const std::string& endpoint) {
    if (horizon_days <= 0) throw ConfigError("horizon_days must be positive");
    long long base, later;
    if (endpoint == "cases") {
        base = panel.cases_at(target_date);
        later = panel.cases_at(target_date.plus_days(horizon_days));
    } else if (endpoint == "deaths") {
        base = panel.deaths_at(target_date);
        later = panel.deaths_at(target_date.plus_days(horizon_days));
    } else {
        throw ConfigError("endpoint must be 'cases' or 'deaths', got '" + endpoint + "'");
    }
    if (base <= 0)
        throw DataError("state " + panel.state + ": cumulative " + endpoint + " is zero at " +
                        target_date.iso() + "; relative growth undefined");
    return static_cast<double>(later) / static_cast<double>(base);
}

const std::vector<std::string>& covariate_column_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v = kStaticColumns;
        for (const char* e : {"cases_per100k_30d", "cases_per100k_14d", "cases_per100k_7d",
                              "deaths_per100k_30d", "deaths_per100k_14d", "deaths_per100k_7d",
                              "tests_per100k_30d", "tests_per100k_14d", "tests_per100k_7d"})
            v.push_back(e);
        for (const auto& [name, kind] : kEverColumns) v.push_back(name);
        v.push_back("mobility_residential_14d");
        v.push_back("mobility_residential_7d");
        return v;
    }();
    return names;
}

Table build_covariates(const Snapshot& snap, const std::vector<std::string>& states,
                       const std::vector<Date>& target_dates, PolicyDateField field) {
    if (states.size() != target_dates.size())
        throw DataError("build_covariates: one target date per state is required");
    const auto& names = covariate_column_names();
    Table w;
    w.names = names;
    w.values.resize(static_cast<Eigen::Index>(states.size()),
                    static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
        const std::string& state = states[i];
        const Date& target = target_dates[i];
        auto panel_it = snap.panels.find(state);
        auto static_it = snap.static_covariates.find(state);
        if (panel_it == snap.panels.end())
            throw DataError("state " + state + ": no panel data in snapshot");
        if (static_it == snap.static_covariates.end())
            throw DataError("state " + state + ": no static covariates in snapshot");
        const StatePanel& panel = panel_it->second;
        const auto& stat = static_it->second;
        double pop = stat.at("total_population");

        Eigen::Index j = 0;
        auto put = [&](double v, const std::string& name) {
            if (!std::isfinite(v))
                throw DataError("state " + state + ": covariate " + name + " is not finite");
            w.values(static_cast<Eigen::Index>(i), j++) = v;
        };
        for (const auto& name : kStaticColumns) put(stat.at(name), name);
        const double scale = 1e5 / pop;
        for (int back : {30, 14, 7})
            put(scale * static_cast<double>(panel.cases_at(target.plus_days(-back))),
                "cases_per100k");
        for (int back : {30, 14, 7})
            put(scale * static_cast<double>(panel.deaths_at(target.plus_days(-back))),
                "deaths_per100k");
        for (int back : {30, 14, 7})
            put(scale * static_cast<double>(panel.tests_at(target.plus_days(-back))),
                "tests_per100k");
        for (const auto& [name, kind] : kEverColumns) {
            bool ever = false;
            for (const auto& rec : snap.policies) {
                if (rec.state != state || rec.kind != kind) continue;
                std::optional<Date> from = record_date(rec, field);
                if (from && *from <= target) ever = true;
            }
            put(ever ? 1.0 : 0.0, name);
        }
        put(panel.mobility_at(target.plus_days(-14)), "mobility_residential_14d");
        put(panel.mobility_at(target.plus_days(-7)), "mobility_residential_7d");
    }
    return w;
}

AnalysisDataset build_dataset(const Snapshot& snap, const DatasetSpec& spec) {
    AnalysisDataset ds;
    ds.states = snap.states;
    ds.endpoint = spec.endpoint;
    ds.horizon_days = spec.horizon_days;
    ds.mode = spec.mode;

    switch (spec.mode) {
        case AnalysisMode::Primary:
            ds.target_dates.assign(ds.states.size(), spec.target_date);
            break;
        case AnalysisMode::Secondary: {
            SecondaryTargets t = secondary_target_dates(snap.policies, ds.states,
                                                        spec.secondary_fallback, spec.window_end);
            ds.target_dates = std::move(t.dates);
            break;
        }
        case AnalysisMode::Custom:
            for (const auto& state : ds.states) {
                auto it = spec.custom_targets.find(state);
                if (it == spec.custom_targets.end())
                    throw DataError("state " + state + ": no target date provided");
                ds.target_dates.push_back(it->second);
            }
            break;
    }

    ds.A = build_exposure(snap.policies, ds.states, ds.target_dates, spec.exposure_date_field);
    ds.exposure_class =
        classify_exposure(snap.policies, ds.states, ds.target_dates, spec.exposure_date_field);

    const int n_early = static_cast<int>(ds.A.sum());
    if (n_early == 0 || n_early == static_cast<int>(ds.states.size()))
        throw DataError("exposure arm empty: " + std::to_string(n_early) + " of " +
                        std::to_string(ds.states.size()) +
                        " states exposed; both arms must be non-empty");

    ds.Y.resize(static_cast<Eigen::Index>(ds.states.size()));
    for (std::size_t i = 0; i < ds.states.size(); ++i) {
        double y = build_outcome(snap.panels.at(ds.states[i]), ds.target_dates[i],
                                 spec.horizon_days, spec.endpoint);
        if (!(y >= 1.0) || !std::isfinite(y))
            throw DataError("state " + ds.states[i] + ": relative growth " + format_double(y) +
                            " violates the cumulative-series contract (must be >= 1)");
        ds.Y[static_cast<Eigen::Index>(i)] = y;
    }

    ds.W = build_covariates(snap, ds.states, ds.target_dates, spec.exposure_date_field);
    ds.urbanicity.resize(static_cast<Eigen::Index>(ds.states.size()));
    for (std::size_t i = 0; i < ds.states.size(); ++i)
        ds.urbanicity[static_cast<Eigen::Index>(i)] =
            snap.static_covariates.at(ds.states[i]).at("urbanicity");
    return ds;
}

void write_dataset_csv(const AnalysisDataset& ds, const std::string& csv_path,
                       const std::string& sidecar_path) {
    std::vector<std::string> header = {"state"};
    for (const auto& name : ds.W.names) header.push_back(name);
    header.push_back("A");
    header.push_back("Y");
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < ds.n(); ++i) {
        std::vector<std::string> row = {ds.states[static_cast<std::size_t>(i)]};
        for (Eigen::Index j = 0; j < ds.W.p(); ++j) row.push_back(format_double(ds.W.values(i, j)));
        row.push_back(format_double(ds.A[i]));
        row.push_back(format_double(ds.Y[i]));
        rows.push_back(std::move(row));
    }
    write_csv(csv_path, header, rows);

    nlohmann::json meta;
    meta["endpoint"] = ds.endpoint;
    meta["horizon_days"] = ds.horizon_days;
    meta["mode"] = analysis_mode_name(ds.mode);
    nlohmann::json targets = nlohmann::json::object();
    nlohmann::json classes = nlohmann::json::object();
    for (std::size_t i = 0; i < ds.states.size(); ++i) {
        targets[ds.states[i]] = ds.target_dates[i].iso();
        classes[ds.states[i]] = exposure_class_name(ds.exposure_class[i]);
    }
    meta["target_dates"] = targets;
    meta["exposure_class"] = classes;
    meta["n_early"] = static_cast<int>(ds.A.sum());
    meta["n_delayed"] = static_cast<int>(ds.A.size() - static_cast<Eigen::Index>(ds.A.sum()));
    atomic_write_file(sidecar_path, meta.dump(2) + "\n");
}

namespace {

std::vector<double> group_values(const Eigen::VectorXd& col, const Eigen::VectorXd& a, int arm) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < col.size(); ++i)
        if (arm < 0 || static_cast<int>(a[i]) == arm) out.push_back(col[i]);
    return out;
}

Table1Row continuous_row(const std::string& section, const std::string& label,
                         const Eigen::VectorXd& col, const Eigen::VectorXd& a) {
    Table1Row r;
    r.section = section;
    r.label = label;
    r.indicator = false;
    auto fill = [&](int arm, double* m, double* lo, double* hi) {
        std::vector<double> v = group_values(col, a, arm);
        *m = quantile_type7(v, 0.5);
        *lo = quantile_type7(v, 0.25);
        *hi = quantile_type7(v, 0.75);
    };
    fill(-1, &r.overall_a, &r.overall_b, &r.overall_c);
    fill(1, &r.early_a, &r.early_b, &r.early_c);
    fill(0, &r.delayed_a, &r.delayed_b, &r.delayed_c);
    return r;
}

Table1Row indicator_row(const std::string& section, const std::string& label,
                        const Eigen::VectorXd& col, const Eigen::VectorXd& a) {
    Table1Row r;
    r.section = section;
    r.label = label;
    r.indicator = true;
    auto fill = [&](int arm, double* count, double* pct) {
        std::vector<double> v = group_values(col, a, arm);
        double c = 0;
        for (double x : v) c += x;
        *count = c;
        *pct = v.empty() ? 0.0 : 100.0 * c / static_cast<double>(v.size());
    };
    fill(-1, &r.overall_a, &r.overall_b);
    fill(1, &r.early_a, &r.early_b);
    fill(0, &r.delayed_a, &r.delayed_b);
    return r;
}

}  // namespace

std::vector<Table1Row> summarize_table1(const AnalysisDataset& ds) {
    auto wcol = [&](const std::string& name) -> Eigen::VectorXd {
        return ds.W.values.col(ds.W.col_required(name));
    };
    std::vector<Table1Row> rows;
    const std::string demo = "Population Demographics";
    rows.push_back(continuous_row(demo, "Black or African American (%)", wcol("pct_black"), ds.A));
    rows.push_back(continuous_row(demo, "Hispanic (%)", wcol("pct_hispanic"), ds.A));
    rows.push_back(continuous_row(demo, "Mixed Race (%)", wcol("pct_mixed_race"), ds.A));
    rows.push_back(continuous_row(demo, "Caucasian (%)", wcol("pct_caucasian"), ds.A));
    rows.push_back(continuous_row(demo, "Median Age", wcol("median_age"), ds.A));
    rows.push_back(continuous_row(demo, "Smoker (%)", wcol("pct_smoker"), ds.A));
    rows.push_back(indicator_row("Political Leaning", "Republican", wcol("republican"), ds.A));
    const std::string dens = "Population Density & Urbanicity";
    rows.push_back(continuous_row(dens, "Total Population", wcol("total_population"), ds.A));
    rows.push_back(
        continuous_row(dens, "Population Density (people per km2)", wcol("population_density"),
                       ds.A));
    rows.push_back(continuous_row(dens, "Urbanicity in 2010 (%)", ds.urbanicity, ds.A));
    rows.push_back(continuous_row(dens, "Public Transportation Usage (%)",
                                  wcol("pct_commute_transit"), ds.A));
    const std::string prior = "Prior COVID-19 Outcomes (per 100,000 residents)";
    rows.push_back(
        continuous_row(prior, "Confirmed Cases 30 days prior", wcol("cases_per100k_30d"), ds.A));
    rows.push_back(
        continuous_row(prior, "Confirmed Cases 14 days prior", wcol("cases_per100k_14d"), ds.A));
    rows.push_back(
        continuous_row(prior, "Confirmed Cases 7 days prior", wcol("cases_per100k_7d"), ds.A));
    rows.push_back(continuous_row(prior, "Deaths 30 days prior", wcol("deaths_per100k_30d"), ds.A));
    rows.push_back(continuous_row(prior, "Deaths 14 days prior", wcol("deaths_per100k_14d"), ds.A));
    rows.push_back(continuous_row(prior, "Deaths 7 days prior", wcol("deaths_per100k_7d"), ds.A));
    const std::string pol = "Prior COVID-19 Policies";
    rows.push_back(indicator_row(pol, "Implemented Stay-at-Home", wcol("ever_stay_at_home"), ds.A));
    rows.push_back(indicator_row(pol, "Implemented Gathering Restrictions",
                                 wcol("ever_gathering_restriction"), ds.A));
    rows.push_back(
        indicator_row(pol, "Implemented School Masking", wcol("ever_school_masking"), ds.A));
    const std::string mob = "Changes in Mobility";
    rows.push_back(continuous_row(mob, "Mobility Change 14 days prior (%)",
                                  wcol("mobility_residential_14d"), ds.A));
    rows.push_back(continuous_row(mob, "Mobility Change 7 days prior (%)",
                                  wcol("mobility_residential_7d"), ds.A));
    return rows;
}

}  // namespace maskrr
