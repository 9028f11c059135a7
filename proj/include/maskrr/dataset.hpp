#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maskrr/common.hpp"
#include "maskrr/csv.hpp"
#include "maskrr/date.hpp"

namespace maskrr {

// ---------------------------------------------------------------------------
// Snapshot types: a frozen directory of CSV files describing state panels,
// policy records, and static covariates.
// ---------------------------------------------------------------------------

// Daily per-state time series stored densely from `start` onward.
struct StatePanel {
    std::string state;
    double population = 0.0;  // persons, filled from the static covariate table
    Date start;               // date of row 0; series is contiguous daily
    std::vector<long long> cum_cases;
    std::vector<long long> cum_deaths;
    std::vector<long long> cum_tests;
    std::vector<double> mobility_residential;  // percent change from baseline

    int size() const { return static_cast<int>(cum_cases.size()); }
    Date last_date() const { return start.plus_days(size() - 1); }
    bool covers(const Date& d) const {
        return d >= start && d <= last_date();
    }
    int index_of(const Date& d) const;  // throws DataError when out of range

    long long cases_at(const Date& d) const { return cum_cases[index_of(d)]; }
    long long deaths_at(const Date& d) const { return cum_deaths[index_of(d)]; }
    long long tests_at(const Date& d) const { return cum_tests[index_of(d)]; }
    double mobility_at(const Date& d) const { return mobility_residential[index_of(d)]; }
};

enum class PolicyKind {
    PublicMasking,
    BusinessMasking,
    SchoolMasking,
    StayAtHome,
    GatheringRestriction,
    RestaurantRestriction,
    BusinessClosureNonessential,
    BusinessClosureOther,
};

std::string policy_kind_name(PolicyKind kind);
PolicyKind policy_kind_from_name(const std::string& name);
bool is_masking_kind(PolicyKind kind);

struct PolicyRecord {
    std::string state;
    PolicyKind kind = PolicyKind::PublicMasking;
    int mask_level = 0;  // 1..3 for masking kinds, 0 (absent) otherwise
    std::optional<Date> issued;
    std::optional<Date> enacted;
    std::optional<Date> expired;
    std::optional<Date> end;

    // The date the policy stops binding: the earlier of `expired` and `end`,
    // or absent if neither is recorded.
    std::optional<Date> effective_end() const;
};

// Which date column "in place by the target date" keys on.
enum class PolicyDateField { Enacted, Issued };

PolicyDateField policy_date_field_from_name(const std::string& name);
std::string policy_date_field_name(PolicyDateField f);

struct Snapshot {
    std::vector<std::string> states;  // sorted two-letter codes
    std::map<std::string, StatePanel> panels;
    std::vector<PolicyRecord> policies;
    // state -> (column -> value) for the static covariate file
    std::map<std::string, std::map<std::string, double>> static_covariates;
    std::vector<std::string> static_columns;  // header order minus "state"
    // sha256 of each input file, keyed by file name (for run manifests)
    std::map<std::string, std::string> file_checksums;
};

// Load and fully validate a snapshot directory containing panel.csv,
// policies.csv, and static_covariates.csv. Throws DataError on any problem.
Snapshot load_snapshot(const std::string& dir);

// Non-throwing variant: returns a list of human-readable problems
// (empty when the snapshot is valid).
std::vector<std::string> validate_snapshot(const std::string& dir);

// ---------------------------------------------------------------------------
// Exposure, outcome, and covariate construction.
// ---------------------------------------------------------------------------

enum class ExposureClass {
    Early,       // strictest public masking mandate in place by the target date
    LateLevel3,  // strictest mandate adopted only after the target date
    WeakerOnly,  // some public masking mandate, but never the strictest level
    Never,       // no public masking mandate on record
};

std::string exposure_class_name(ExposureClass c);

// True when `rec` (a level-3 public masking record) binds on date `d`.
bool policy_in_place(const PolicyRecord& rec, const Date& d, PolicyDateField field);

// A_i = 1 iff a level-3 public masking mandate is in place for state i on its
// target date. Throws DataError on contradictory dates.
Eigen::VectorXd build_exposure(const std::vector<PolicyRecord>& policies,
                               const std::vector<std::string>& states,
                               const std::vector<Date>& target_dates,
                               PolicyDateField field = PolicyDateField::Enacted);

// Decomposes each state into Early / LateLevel3 / WeakerOnly / Never.
std::vector<ExposureClass> classify_exposure(const std::vector<PolicyRecord>& policies,
                                             const std::vector<std::string>& states,
                                             const std::vector<Date>& target_dates,
                                             PolicyDateField field = PolicyDateField::Enacted);

struct SecondaryTargets {
    std::vector<Date> dates;
    // states that never issued a stay-at-home order (assigned `fallback`)
    std::vector<std::string> used_fallback;
    // states whose order never terminated on record (assigned `window_end`)
    std::vector<std::string> used_window_end;
};

// Per-state target dates for the analysis keyed to lifting stay-at-home:
// the (final) termination date of the state's stay-at-home order, `fallback`
// for states that never issued one, and `window_end` for orders still active
// at the end of the analysis window.
SecondaryTargets secondary_target_dates(const std::vector<PolicyRecord>& policies,
                                        const std::vector<std::string>& states,
                                        const Date& fallback,
                                        const Date& window_end);

// Y = cumulative(target + horizon) / cumulative(target) for the endpoint
// ("cases" or "deaths"). Throws DataError when the denominator is zero or a
// date falls outside the panel's coverage.
double build_outcome(const StatePanel& panel, const Date& target_date,
                     int horizon_days, const std::string& endpoint);

// Names of the 38 adjustment-set columns, in fixed order.
const std::vector<std::string>& covariate_column_names();

// Builds the N x 38 adjustment-set matrix. Urbanicity is deliberately not a
// column here: it is descriptive only and carried separately.
Table build_covariates(const Snapshot& snap,
                       const std::vector<std::string>& states,
                       const std::vector<Date>& target_dates,
                       PolicyDateField field = PolicyDateField::Enacted);

// How per-state target dates are chosen: a single fixed date (primary), the
// state-specific lifting of stay-at-home (secondary), or caller-provided
// per-state dates (custom).
enum class AnalysisMode { Primary, Secondary, Custom };

std::string analysis_mode_name(AnalysisMode m);
AnalysisMode analysis_mode_from_name(const std::string& name);

struct DatasetSpec {
    std::string endpoint = "cases";  // "cases" or "deaths"
    int horizon_days = 21;           // 21, 30, 45, or 60
    AnalysisMode mode = AnalysisMode::Primary;
    Date target_date = Date::from_ymd(2020, 9, 1);          // primary mode
    Date secondary_fallback = Date::from_ymd(2020, 5, 15);  // never stay-at-home
    Date window_end = Date::from_ymd(2020, 10, 31);
    PolicyDateField exposure_date_field = PolicyDateField::Enacted;
    std::map<std::string, Date> custom_targets;  // custom mode only
};

struct AnalysisDataset {
    Table W;            // 38 adjustment-set columns
    Eigen::VectorXd A;  // binary exposure
    Eigen::VectorXd Y;  // relative growth, every entry >= 1
    std::vector<std::string> states;
    std::vector<Date> target_dates;
    std::vector<ExposureClass> exposure_class;
    Eigen::VectorXd urbanicity;  // descriptive only, not part of W
    std::string endpoint;
    int horizon_days = 0;
    AnalysisMode mode = AnalysisMode::Primary;

    int n() const { return static_cast<int>(Y.size()); }
};

// Full construction: exposure, outcome, covariates, and invariant checks
// (Y >= 1, both arms non-empty, no missing cells).
AnalysisDataset build_dataset(const Snapshot& snap, const DatasetSpec& spec);

// Writes the dataset as CSV (columns W..., A, Y keyed by state) plus a JSON
// sidecar recording endpoint, horizon, and per-state target dates.
void write_dataset_csv(const AnalysisDataset& ds, const std::string& csv_path,
                       const std::string& sidecar_path);

// ---------------------------------------------------------------------------
// Descriptive summary (grouped medians/quartiles and indicator counts).
// ---------------------------------------------------------------------------

struct Table1Row {
    std::string label;
    std::string section;  // group header the row belongs under
    bool indicator = false;
    // continuous: median, q25, q75 per group; indicator: count, percent
    double overall_a = 0.0, overall_b = 0.0, overall_c = 0.0;
    double early_a = 0.0, early_b = 0.0, early_c = 0.0;
    double delayed_a = 0.0, delayed_b = 0.0, delayed_c = 0.0;
};

std::vector<Table1Row> summarize_table1(const AnalysisDataset& ds);

}  // namespace maskrr
