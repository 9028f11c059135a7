// Utility-layer tests: calendar dates, CSV round-trips, numeric string
// formatting, quantiles, special functions, and the seeded RNG.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "maskrr/common.hpp"
#include "maskrr/csv.hpp"
#include "maskrr/date.hpp"
#include "maskrr/rng.hpp"
#include "maskrr/sha256.hpp"
#include "maskrr/stats.hpp"

using namespace maskrr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("maskrr_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Student-t density, integrated numerically with Simpson's rule as an
// independent check on the closed-form CDF.
double t_density(double x, double nu) {
    double logc = std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) -
                  0.5 * std::log(nu * M_PI);
    return std::exp(logc - (nu + 1.0) / 2.0 * std::log1p(x * x / nu));
}

double t_cdf_by_integration(double x, double nu) {
    // integrate the density from 0 to |x| with Simpson's rule
    double a = 0.0, b = std::fabs(x);
    const int steps = 40000;  // even
    double h = (b - a) / steps;
    double acc = t_density(a, nu) + t_density(b, nu);
    for (int i = 1; i < steps; ++i)
        acc += t_density(a + i * h, nu) * (i % 2 == 1 ? 4.0 : 2.0);
    double half = acc * h / 3.0;
    return x >= 0 ? 0.5 + half : 0.5 - half;
}

}  // namespace

TEST_CASE("dates parse, print, and do calendar arithmetic") {
    Date d = Date::parse("2020-09-01");
    CHECK(d.iso() == "2020-09-01");
    CHECK(d.plus_days(21).iso() == "2020-09-22");
    CHECK(d.plus_days(30).iso() == "2020-10-01");
    CHECK(d.plus_days(60).iso() == "2020-10-31");
    CHECK(Date::parse("2020-10-31") - d == 60);

    // leap day handling
    Date feb28 = Date::parse("2020-02-28");
    CHECK(feb28.plus_days(1).iso() == "2020-02-29");
    CHECK(feb28.plus_days(2).iso() == "2020-03-01");
    CHECK(Date::parse("2021-02-28").plus_days(1).iso() == "2021-03-01");

    // ordering
    CHECK(Date::parse("2020-05-15") < Date::parse("2020-09-01"));
    CHECK(Date::parse("2020-05-15") == Date::from_ymd(2020, 5, 15));

    // round-trip through the day count
    CHECK(Date::from_days(d.days()) == d);
}

TEST_CASE("invalid date strings are rejected") {
    CHECK_THROWS_AS(Date::parse("2020-13-01"), DataError);
    CHECK_THROWS_AS(Date::parse("2020-02-30"), DataError);
    CHECK_THROWS_AS(Date::parse("20200901"), DataError);
    CHECK_THROWS_AS(Date::parse("2020-9-1"), DataError);
    CHECK_THROWS_AS(Date::parse("2020-09-01x"), DataError);
    CHECK_THROWS_AS(Date::parse(""), DataError);
    CHECK_THROWS_AS(Date::from_ymd(2020, 0, 10), DataError);
}

TEST_CASE("csv writing quotes special fields and reading round-trips them") {
    fs::path dir = temp_dir("csv");
    std::string path = (dir / "t.csv").string();
    std::vector<std::string> header = {"state", "note", "value"};
    std::vector<std::vector<std::string>> rows = {
        {"NY", "plain", "1.5"},
        {"CA", "has,comma", "2"},
        {"TX", "say \"hi\"", "-3"},
        {"WA", "", "0"},
    };
    write_csv(path, header, rows);

    // quoting convention visible in the raw bytes
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("\"has,comma\"") != std::string::npos);
    CHECK(text.find("\"say \"\"hi\"\"\"") != std::string::npos);

    CsvTable t = read_csv(path);
    CHECK(t.header == header);
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[1][1] == "has,comma");
    CHECK(t.rows[2][1] == "say \"hi\"");
    CHECK(t.rows[3][1] == "");
    CHECK(t.col("value") == 2);
    CHECK(t.col("missing") == -1);
    CHECK_THROWS_AS(t.col_required("missing"), DataError);
    CHECK(t.at(0, "state") == "NY");
}

TEST_CASE("csv rejects embedded line breaks and ragged rows") {
    CHECK_THROWS_AS(csv_to_string({"a"}, {{"line\nbreak"}}), DataError);
    CHECK_THROWS_AS(csv_to_string({"a", "b"}, {{"1"}}), DataError);

    fs::path dir = temp_dir("csv_bad");
    std::string path = (dir / "bad.csv").string();
    std::ofstream(path) << "a,b\n1,2\n3\n";
    CHECK_THROWS_AS(read_csv(path), DataError);
    CHECK_THROWS_AS(read_csv((dir / "absent.csv").string()), DataError);
}

TEST_CASE("atomic_write_file replaces content and leaves no temp file") {
    fs::path dir = temp_dir("atomic");
    std::string path = (dir / "f.txt").string();
    atomic_write_file(path, "first");
    atomic_write_file(path, "second");
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(text == "second");
    CHECK_FALSE(fs::exists(path + ".tmp"));
}

TEST_CASE("strict numeric parsing accepts clean values and rejects junk") {
    CHECK(parse_double("1.5", "ctx") == doctest::Approx(1.5));
    CHECK(parse_double("-2e3", "ctx") == doctest::Approx(-2000.0));
    CHECK_THROWS_AS(parse_double("", "ctx"), DataError);
    CHECK_THROWS_AS(parse_double("abc", "ctx"), DataError);
    CHECK_THROWS_AS(parse_double("1.5x", "ctx"), DataError);
    CHECK(parse_int("42", "ctx") == 42);
    CHECK(parse_int("-7", "ctx") == -7);
    CHECK_THROWS_AS(parse_int("", "ctx"), DataError);
    CHECK_THROWS_AS(parse_int("4.2", "ctx"), DataError);
    CHECK_THROWS_AS(parse_int("9x", "ctx"), DataError);
}

TEST_CASE("format_double round-trips the exact value") {
    for (double v : {0.1, 1.0 / 3.0, -0.0, 1e300, 2.5e-17, -123.456,
                     0.30000000000000004}) {
        std::string s = format_double(v);
        CHECK(parse_double(s, "roundtrip") == v);
    }
    CHECK(format_double(2.0) == "2");
}

TEST_CASE("format_fixed rounds half away from zero at the printed precision") {
    CHECK(format_fixed(0.955, 2) == "0.96");
    CHECK(format_fixed(1.005, 2) == "1.01");
    CHECK(format_fixed(-0.955, 2) == "-0.96");
    CHECK(format_fixed(0.9549, 2) == "0.95");
    CHECK(format_fixed(2.675, 2) == "2.68");
    CHECK(format_fixed(1.0, 2) == "1.00");
    CHECK(format_fixed(-1.235, 2) == "-1.24");
    CHECK(format_fixed(-0.0004, 2) == "0.00");  // no negative zero
    CHECK(format_fixed(0.2104, 3) == "0.210");
    CHECK(format_fixed(0.5, 0) == "1");
    CHECK(format_fixed(-0.4, 0) == "0");
}

TEST_CASE("sha256 matches published test vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

    fs::path dir = temp_dir("sha");
    std::string path = (dir / "v.txt").string();
    std::ofstream(path) << "abc";
    CHECK(sha256_file(path) == sha256_hex("abc"));
}

TEST_CASE("mean and sample standard deviation match hand computation") {
    std::vector<double> x = {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
    CHECK(mean(x) == doctest::Approx(5.0));
    // sum of squared deviations = 32, n-1 = 7
    CHECK(sample_sd(x) == doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-12));
    CHECK_THROWS_AS(mean(std::vector<double>{}), EstimationError);
    CHECK_THROWS_AS(sample_sd(std::vector<double>{1.0}), EstimationError);
}

TEST_CASE("linear-interpolation quantiles match hand-worked positions") {
    std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    // position p*(n-1): p=.25 -> 0.75 -> 1.75 ; p=.5 -> 1.5 -> 2.5
    CHECK(quantile_type7(v, 0.25) == doctest::Approx(1.75).epsilon(1e-12));
    CHECK(quantile_type7(v, 0.5) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(quantile_type7(v, 0.75) == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(quantile_type7(v, 0.0) == doctest::Approx(1.0));
    CHECK(quantile_type7(v, 1.0) == doctest::Approx(4.0));

    // input order must not matter (a sorted copy is used)
    std::vector<double> shuffled = {4.0, 1.0, 3.0, 2.0};
    CHECK(quantile_type7(shuffled, 0.25) == doctest::Approx(1.75).epsilon(1e-12));
    CHECK(shuffled == std::vector<double>{4.0, 1.0, 3.0, 2.0});

    CHECK(quantile_type7({7.5}, 0.99) == doctest::Approx(7.5));
    CHECK_THROWS_AS(quantile_type7({}, 0.5), EstimationError);
    CHECK_THROWS_AS(quantile_type7({1.0}, 1.5), EstimationError);
}

TEST_CASE("six-number summary orders min, quartiles, mean, and max") {
    SixNumber s = six_number({5.0, 1.0, 3.0, 2.0, 4.0});
    CHECK(s.min == doctest::Approx(1.0));
    CHECK(s.q1 == doctest::Approx(2.0));
    CHECK(s.median == doctest::Approx(3.0));
    CHECK(s.mean == doctest::Approx(3.0));
    CHECK(s.q3 == doctest::Approx(4.0));
    CHECK(s.max == doctest::Approx(5.0));
}

TEST_CASE("normal CDF and inverse CDF agree with reference values") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-12));
    CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-12));
    CHECK(normal_inv_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_inv_cdf(0.5) == doctest::Approx(0.0));

    // inverse identity across the support, including moderately deep tails
    for (double p : {1e-6, 1e-3, 0.025, 0.2, 0.5, 0.8, 0.975, 1.0 - 1e-6}) {
        double x = normal_inv_cdf(p);
        CHECK(normal_cdf(x) == doctest::Approx(p).epsilon(1e-9));
    }
    CHECK_THROWS_AS(normal_inv_cdf(0.0), EstimationError);
    CHECK_THROWS_AS(normal_inv_cdf(1.0), EstimationError);
    CHECK_THROWS_AS(normal_inv_cdf(-0.1), EstimationError);
}

TEST_CASE("student-t CDF matches numeric integration of the density") {
    for (double nu : {1.5, 2.0, 5.0, 10.0, 48.0}) {
        for (double x : {0.3, 1.3, 2.7}) {
            CHECK(student_t_cdf(x, nu) ==
                  doctest::Approx(t_cdf_by_integration(x, nu)).epsilon(1e-8));
            // symmetry
            CHECK(student_t_cdf(-x, nu) ==
                  doctest::Approx(1.0 - student_t_cdf(x, nu)).epsilon(1e-12));
        }
    }
    CHECK(student_t_cdf(0.0, 7.0) == doctest::Approx(0.5));
}

TEST_CASE("correlation and its p-value match direct formulas") {
    std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> y = {2.1, 2.4, 2.2, 3.3, 3.1, 3.9, 3.6, 4.5, 4.4, 5.2};
    double r = pearson_r(x, y);
    // direct computation
    double mx = mean(x), my = mean(y), sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    CHECK(r == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-12));

    // p-value against the numerically integrated t distribution
    int n = static_cast<int>(x.size());
    double t = std::fabs(r) * std::sqrt((n - 2) / (1.0 - r * r));
    double p_ref = 2.0 * (1.0 - t_cdf_by_integration(t, n - 2));
    CHECK(pearson_pvalue(r, n) == doctest::Approx(p_ref).epsilon(1e-7));

    // perfect correlation pins the p-value at zero
    CHECK(pearson_pvalue(1.0, 10) == doctest::Approx(0.0));
    CHECK_THROWS_AS(pearson_r({1, 2}, {3, 4}), EstimationError);
    CHECK_THROWS_AS(pearson_r({1, 1, 1}, {1, 2, 3}), EstimationError);
}

TEST_CASE("seed derivation is deterministic and separates streams") {
    CHECK(mix_seed(42) == mix_seed(42));
    CHECK(mix_seed(42) != mix_seed(43));
    CHECK(derive_seed(7, 1) == derive_seed(7, 1));
    CHECK(derive_seed(7, 1) != derive_seed(7, 2));
    CHECK(derive_seed(7, 1) != derive_seed(8, 1));
}

TEST_CASE("rng streams are reproducible and land in their ranges") {
    Rng a(123), b(123), c(124);
    bool same = true, diff = false;
    for (int i = 0; i < 100; ++i) {
        double ua = a.uniform();
        double ub = b.uniform();
        double uc = c.uniform();
        same = same && (ua == ub);
        diff = diff || (ua != uc);
        CHECK(ua >= 0.0);
        CHECK(ua < 1.0);
    }
    CHECK(same);
    CHECK(diff);

    Rng r(99);
    for (int i = 0; i < 200; ++i) {
        double u = r.uniform_open();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        std::uint64_t k = r.uniform_int(7);
        CHECK(k < 7);
    }
    CHECK_THROWS_AS(r.uniform_int(0), EstimationError);
    CHECK_THROWS_AS(r.gamma(-1.0, 1.0), EstimationError);
}

TEST_CASE("rng moments approach their targets on large samples") {
    Rng r(2024);
    const int n = 20000;
    double sn = 0, sn2 = 0, sg = 0;
    for (int i = 0; i < n; ++i) {
        double z = r.normal();
        sn += z;
        sn2 += z * z;
        sg += r.gamma(2.0, 0.05);
    }
    CHECK(sn / n == doctest::Approx(0.0).epsilon(0.05));
    CHECK(std::abs(sn / n) < 0.03);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.05));
    CHECK(sg / n == doctest::Approx(0.10).epsilon(0.05));  // shape*scale
}

TEST_CASE("seeded shuffle is a deterministic permutation") {
    std::vector<int> v(20);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;
    Rng r1(5), r2(5);
    maskrr::shuffle(v, r1);
    maskrr::shuffle(w, r2);
    CHECK(v == w);
    std::vector<int> sorted_v = v;
    std::sort(sorted_v.begin(), sorted_v.end());
    std::vector<int> expect(20);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted_v == expect);

    std::vector<int> u(20);
    std::iota(u.begin(), u.end(), 0);
    Rng r3(6);
    maskrr::shuffle(u, r3);
    CHECK(u != v);  // different seed, different order (with near certainty)
}
