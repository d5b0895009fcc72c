#include "doctest.h"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "eeo/dataset.hpp"
#include "eeo/errors.hpp"

using namespace eeo;

namespace {

Matrix ramp_series(std::size_t t_len) {
    Matrix m(t_len, 1);
    for (std::size_t t = 0; t < t_len; ++t) m(t, 0) = static_cast<double>(t + 1);
    return m;
}

std::string temp_csv(const char* tag) {
    return (std::filesystem::temp_directory_path() /
            (std::string("eeo_data_") + tag + ".csv"))
        .string();
}

}  // namespace

TEST_CASE("a 1..10 ramp with L=3 H=1 yields seven train windows") {
    const WindowedDataset ds =
        window_split(ramp_series(10), 3, 1, 1, {1.0, 0.0, 0.0});
    REQUIRE(ds.train.size() == 7);
    CHECK(ds.val.empty());
    CHECK(ds.test.empty());

    CHECK(ds.stats.mean[0] == doctest::Approx(5.5).epsilon(1e-15));
    CHECK(ds.stats.stddev[0] == doctest::Approx(2.8722813232690143).epsilon(1e-15));

    // Denormalized, the first window is ([1,2,3], [4]).
    const TSWindow& w0 = ds.train.front();
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(w0.x(0, k) * ds.stats.stddev[0] + ds.stats.mean[0] ==
              doctest::Approx(static_cast<double>(k + 1)).epsilon(1e-14));
    CHECK(w0.y(0, 0) * ds.stats.stddev[0] + ds.stats.mean[0] ==
          doctest::Approx(4.0).epsilon(1e-14));
    // And the last window ends at the series end.
    const TSWindow& w6 = ds.train.back();
    CHECK(w6.y(0, 0) * ds.stats.stddev[0] + ds.stats.mean[0] ==
          doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("constant columns are clamped to unit deviation and normalize to zero") {
    Matrix m(12, 2);
    for (std::size_t t = 0; t < 12; ++t) {
        m(t, 0) = 7.0;
        m(t, 1) = static_cast<double>(t);
    }
    const WindowedDataset ds = window_split(m, 4, 2, 1, {1.0, 0.0, 0.0});
    CHECK(ds.stats.stddev[0] == 1.0);
    CHECK(ds.stats.mean[0] == 7.0);
    for (const TSWindow& w : ds.train)
        for (std::size_t k = 0; k < 4; ++k) CHECK(w.x(0, k) == 0.0);
}

TEST_CASE("window counts per split follow the floor formula with per-split strides") {
    const Matrix series = gen_sine_mixture(200, 11);
    const std::size_t L = 8, H = 4, stride = 3;
    const WindowedDataset ds = window_split(series, L, H, stride, {0.7, 0.1, 0.2});
    CHECK(ds.train_len == 140);
    CHECK(ds.val_len == 20);
    CHECK(ds.test_len == 40);
    CHECK(ds.train.size() == (140 - L - H) / stride + 1);
    CHECK(ds.val.size() == (20 - L - H) / H + 1);   // stride = horizon
    CHECK(ds.test.size() == (40 - L - H) / H + 1);  // stride = horizon
    CHECK(ds.d == 3);

    // Chronology: the first test window starts right where the test region
    // does, i.e. its first denormalized value equals the source row.
    const TSWindow& t0 = ds.test.front();
    for (std::size_t c = 0; c < 3; ++c) {
        const double raw = t0.x(c, 0) * ds.stats.stddev[c] + ds.stats.mean[c];
        CHECK(raw == doctest::Approx(series(160, c)).epsilon(1e-12));
    }
    // Val/test targets tile without overlap: window i+1's input begins H rows
    // after window i's.
    const TSWindow& v0 = ds.val[0];
    const TSWindow& v1 = ds.val[1];
    for (std::size_t c = 0; c < 3; ++c) {
        const double raw0 = v1.x(c, 0) * ds.stats.stddev[c] + ds.stats.mean[c];
        CHECK(raw0 == doctest::Approx(series(140 + H, c)).epsilon(1e-12));
        (void)v0;
    }
}

TEST_CASE("short positive splits are rejected with the split named") {
    try {
        window_split(ramp_series(30), 8, 4, 1, {0.7, 0.1, 0.2});
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("val") != std::string::npos);
        CHECK(msg.find("12") != std::string::npos);  // lookback + horizon
    }
    CHECK_THROWS_AS(window_split(ramp_series(10), 3, 1, 1, {0.5, 0.25, 0.2}),
                    ValidationError);  // fractions don't sum to 1
    CHECK_THROWS_AS(window_split(ramp_series(10), 0, 1, 1, {1.0, 0.0, 0.0}),
                    ValidationError);
    CHECK_THROWS_AS(window_split(ramp_series(10), 3, 1, 0, {1.0, 0.0, 0.0}),
                    ValidationError);
}

TEST_CASE("normalization statistics never look past the train region") {
    Matrix a = gen_sine_mixture(150, 21);
    Matrix b = a;
    // Corrupt the final 30 rows (the test region under a 0.7/0.1/0.2 split).
    for (std::size_t t = 120; t < 150; ++t)
        for (std::size_t c = 0; c < 3; ++c) b(t, c) += 100.0;

    const WindowedDataset da = window_split(a, 8, 4, 1, {0.7, 0.1, 0.2});
    const WindowedDataset db = window_split(b, 8, 4, 1, {0.7, 0.1, 0.2});
    CHECK(da.stats.mean == db.stats.mean);
    CHECK(da.stats.stddev == db.stats.stddev);
    REQUIRE(da.train.size() == db.train.size());
    for (std::size_t i = 0; i < da.train.size(); ++i) {
        CHECK(da.train[i].x.data() == db.train[i].x.data());
        CHECK(da.train[i].y.data() == db.train[i].y.data());
    }
    REQUIRE(da.val.size() == db.val.size());
    for (std::size_t i = 0; i < da.val.size(); ++i)
        CHECK(da.val[i].x.data() == db.val[i].x.data());
    // The corruption does land in the test windows.
    bool test_differs = false;
    for (std::size_t i = 0; i < da.test.size() && !test_differs; ++i)
        test_differs = da.test[i].x.data() != db.test[i].x.data();
    CHECK(test_differs);
}

TEST_CASE("the sine mixture is deterministic, varied, and centered") {
    const Matrix a = gen_sine_mixture(400, 7);
    const Matrix b = gen_sine_mixture(400, 7);
    const Matrix c = gen_sine_mixture(400, 8);
    CHECK(a.data() == b.data());
    CHECK(a.data() != c.data());
    REQUIRE(a.rows() == 400);
    REQUIRE(a.cols() == 3);
    for (std::size_t v = 0; v < 3; ++v) {
        double mean = 0.0, var = 0.0;
        for (std::size_t t = 0; t < 400; ++t) mean += a(t, v);
        mean /= 400.0;
        for (std::size_t t = 0; t < 400; ++t) var += (a(t, v) - mean) * (a(t, v) - mean);
        var /= 400.0;
        CHECK(std::abs(mean) < 0.5);
        CHECK(std::sqrt(var) > 0.2);
    }
}

TEST_CASE("CSV loading skips a textual timestamp column but keeps numeric ones") {
    const std::string path = temp_csv("ts");
    {
        std::ofstream out(path);
        out << "date,alpha,beta\n";
        out << "2020-01-01,1.5,2.5\n";
        out << "2020-01-02,3.5,4.5\n";
    }
    const SeriesData s = load_series_csv(path);
    REQUIRE(s.columns.size() == 2);
    CHECK(s.columns[0] == "alpha");
    CHECK(s.columns[1] == "beta");
    REQUIRE(s.values.rows() == 2);
    CHECK(s.values(0, 0) == 1.5);
    CHECK(s.values(1, 1) == 4.5);

    const std::string numeric_path = temp_csv("numeric");
    {
        std::ofstream out(numeric_path);
        out << "epoch,alpha\n";
        out << "100,1.5\n";
        out << "200,3.5\n";
    }
    const SeriesData n = load_series_csv(numeric_path);
    REQUIRE(n.columns.size() == 2);  // numeric first column is data
    CHECK(n.values(1, 0) == 200.0);
    std::filesystem::remove(path);
    std::filesystem::remove(numeric_path);
}

TEST_CASE("CSV loading reports bad cells by row and column") {
    const std::string path = temp_csv("bad");
    {
        std::ofstream out(path);
        out << "a,b\n1.0,2.0\n3.0,oops\n";
    }
    try {
        load_series_csv(path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(":3") != std::string::npos);      // line number
        CHECK(msg.find("column 2") != std::string::npos);
        CHECK(msg.find("oops") != std::string::npos);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_series_csv("/definitely/not/here.csv"), IoError);
}

TEST_CASE("save and load round-trip a series exactly") {
    SeriesData s;
    s.columns = {"v0", "v1", "v2"};
    s.values = gen_sine_mixture(64, 99);
    const std::string path = temp_csv("rt");
    save_series_csv(path, s, true);
    const SeriesData back = load_series_csv(path);
    CHECK(back.columns == s.columns);
    REQUIRE(back.values.rows() == s.values.rows());
    CHECK(back.values.data() == s.values.data());  // shortest round-trip: bitwise
    std::filesystem::remove(path);
}
