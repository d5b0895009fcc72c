#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "eeo/diagnostics.hpp"
#include "eeo/matrix.hpp"
#include "eeo/rng.hpp"

using namespace eeo;

namespace {

Matrix uniform_attention(std::size_t n) {
    Matrix a(n, n);
    for (double& x : a.data()) x = 1.0 / static_cast<double>(n);
    return a;
}

Matrix random_stochastic(std::size_t n, std::uint64_t key) {
    Rng rng(key);
    Matrix scores(n, n);
    for (double& x : scores.data()) x = rng.gauss();
    return softmax_rows(scores);
}

std::string temp_dir(const char* tag) {
    const std::filesystem::path p =
        std::filesystem::temp_directory_path() / (std::string("eeo_diag_") + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

DiagnosticsRecord basic_record(std::uint64_t step, double loss) {
    DiagnosticsRecord r;
    r.step = step;
    r.loss = loss;
    r.grad_norm = loss * 0.5;
    return r;
}

}  // namespace

TEST_CASE("attention entropy hits its extremes exactly") {
    CHECK(attention_entropy(uniform_attention(5)) ==
          doctest::Approx(std::log(5.0)).epsilon(1e-12));
    CHECK(attention_entropy(Matrix::identity(4)) == 0.0);
    const Matrix row(1, 3, {0.5, 0.25, 0.25});
    CHECK(attention_entropy(row) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("attention entropy averages rows and respects its bounds") {
    // One point-mass row, one uniform row: mean of 0 and ln 2.
    const Matrix a(2, 2, {1.0, 0.0, 0.5, 0.5});
    CHECK(attention_entropy(a) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
    for (std::uint64_t key = 0; key < 5; ++key) {
        const Matrix s = random_stochastic(6, 100 + key);
        const double h = attention_entropy(s);
        CHECK(h >= 0.0);
        CHECK(h <= std::log(6.0) + 1e-12);
    }
}

TEST_CASE("attention entropy is invariant under row and column permutations") {
    const Matrix a = random_stochastic(5, 42);
    Matrix rows_swapped = a;
    for (std::size_t j = 0; j < 5; ++j) {
        std::swap(rows_swapped(0, j), rows_swapped(3, j));
    }
    Matrix cols_swapped = a;
    for (std::size_t i = 0; i < 5; ++i) {
        std::swap(cols_swapped(i, 1), cols_swapped(i, 4));
    }
    const double h = attention_entropy(a);
    CHECK(attention_entropy(rows_swapped) == doctest::Approx(h).epsilon(1e-12));
    CHECK(attention_entropy(cols_swapped) == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("attention entropy rejects non-stochastic input") {
    const Matrix short_row(1, 2, {0.4, 0.5});
    CHECK_THROWS_AS(attention_entropy(short_row), ValidationError);
    const Matrix negative(1, 2, {-0.1, 1.1});
    CHECK_THROWS_AS(attention_entropy(negative), ValidationError);
}

TEST_CASE("snapshot composes the standalone diagnostics") {
    StepReport rep;
    rep.loss_before = 2.0;
    rep.loss_after = 1.5;
    rep.grad_norm = 0.7;
    rep.lambda_min_est = -0.2;
    rep.escape_fired = true;

    const Matrix z = Matrix::identity(4);
    const Matrix a = uniform_attention(4);
    const DiagnosticsRecord rec = snapshot(12, rep, z, a, true);

    CHECK(rec.step == 12);
    CHECK(rec.loss == 1.5);
    CHECK(rec.grad_norm == 0.7);
    REQUIRE(rec.lambda_min.has_value());
    CHECK(*rec.lambda_min == -0.2);
    CHECK(rec.escape_fired);
    REQUIRE(rec.erank_repr.has_value());
    CHECK(*rec.erank_repr == 4.0);  // identity: exact
    REQUIRE(rec.attn_entropy.has_value());
    CHECK(*rec.attn_entropy == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    REQUIRE(rec.nuclear_attn.has_value());
    CHECK(*rec.nuclear_attn == doctest::Approx(1.0).epsilon(1e-9));  // uniform: rank 1, sigma 1
    REQUIRE(rec.erank_attn.has_value());
    CHECK(*rec.erank_attn == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(rec.spectrum_repr.has_value());
    CHECK(rec.spectrum_repr->values.size() == 4);

    const DiagnosticsRecord lean = snapshot(12, rep, z, a, false);
    CHECK_FALSE(lean.spectrum_repr.has_value());
}

TEST_CASE("snapshot flags rank-one representations") {
    Matrix z(4, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        z(0, j) = 1.0 + static_cast<double>(j);
        z(1, j) = 2.0 * (1.0 + static_cast<double>(j));
        z(2, j) = -1.0 * (1.0 + static_cast<double>(j));
        z(3, j) = 0.5 * (1.0 + static_cast<double>(j));
    }
    StepReport rep;
    const DiagnosticsRecord rec = snapshot(0, rep, z, uniform_attention(4), false);
    CHECK(*rec.erank_repr == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("snapshot fields match their standalone operations on random input") {
    Rng rng(77);
    const Matrix z = Matrix::gaussian(6, 4, rng);
    const Matrix a = random_stochastic(6, 78);
    StepReport rep;
    rep.loss_after = 3.25;
    rep.grad_norm = 1.125;
    const DiagnosticsRecord rec = snapshot(3, rep, z, a, true);

    const SingularSpectrum sz = singular_values(z);
    CHECK(*rec.erank_repr == effective_rank(sz));
    CHECK(*rec.erank_attn == effective_rank(singular_values(a)));
    CHECK(*rec.nuclear_attn == doctest::Approx(nuclear_norm(a)).epsilon(1e-12));
    CHECK(*rec.attn_entropy == attention_entropy(a));
    CHECK(rec.spectrum_repr->values == sz.values);
    CHECK_FALSE(rec.lambda_min.has_value());
    CHECK_FALSE(rec.escape_fired);
}

TEST_CASE("padding with a zero column adds a zero singular value and keeps erank") {
    Rng rng(55);
    const Matrix z = Matrix::gaussian(5, 3, rng);
    Matrix wide(5, 4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) wide(i, j) = z(i, j);
    const SingularSpectrum base = singular_values(z);
    const SingularSpectrum extended = singular_values(wide);
    REQUIRE(extended.values.size() == 4);
    CHECK(extended.values[3] <= 1e-12);
    CHECK(std::abs(effective_rank(base) - effective_rank(extended)) <= 1e-8);
}

TEST_CASE("duplicating a column preserves the rank, not the exact spectrum") {
    // The duplicated direction picks up weight sqrt(2), so the nonzero
    // singular values move; what must hold is that no new independent
    // direction appears.
    Rng rng(56);
    const Matrix z = Matrix::gaussian(5, 3, rng);
    Matrix wide(5, 4);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) wide(i, j) = z(i, j);
        wide(i, 3) = z(i, 2);
    }
    const SingularSpectrum extended = singular_values(wide);
    std::size_t nonzero = 0;
    for (double s : extended.values)
        if (s > 1e-10 * extended.values[0]) ++nonzero;
    CHECK(nonzero == 3);
    // And erank stays in the right ballpark (worst case a few percent).
    CHECK(effective_rank(extended) ==
          doctest::Approx(effective_rank(singular_values(z))).epsilon(0.10));
}

TEST_CASE("rank collapse flag follows the trailing-window-vs-global-max rule") {
    auto history_of = [](const std::vector<double>& eranks) {
        std::vector<DiagnosticsRecord> h;
        for (std::size_t i = 0; i < eranks.size(); ++i) {
            DiagnosticsRecord r = basic_record(i, 1.0);
            r.erank_repr = eranks[i];
            h.push_back(r);
        }
        return h;
    };

    CHECK_FALSE(rank_collapse_flag(history_of({8, 8, 8, 8}), 2, 0.99));
    CHECK(rank_collapse_flag(history_of({8, 8, 8, 2, 2}), 2, 0.5));
    CHECK_FALSE(rank_collapse_flag(history_of({8, 3, 6, 8}), 1, 0.5));
    // Shorter history than window: evaluate over what exists.
    CHECK(rank_collapse_flag(history_of({8, 2}), 20, 0.5));

    CHECK_THROWS_AS(rank_collapse_flag({}, 2, 0.5), ValidationError);
    CHECK_THROWS_AS(rank_collapse_flag(history_of({8}), 0, 0.5), ValidationError);
    CHECK_THROWS_AS(rank_collapse_flag(history_of({8}), 2, 1.0), ValidationError);
    CHECK_THROWS_AS(rank_collapse_flag(history_of({8}), 2, 0.0), ValidationError);

    // No rank data at all: never collapses.
    std::vector<DiagnosticsRecord> bare = {basic_record(0, 1.0), basic_record(1, 0.5)};
    CHECK_FALSE(rank_collapse_flag(bare, 2, 0.5));
}

TEST_CASE("collapse flag stays false when erank never leaves the band") {
    Rng rng(66);
    std::vector<DiagnosticsRecord> h;
    for (std::size_t i = 0; i < 50; ++i) {
        DiagnosticsRecord r = basic_record(i, 1.0);
        r.erank_repr = 6.0 + rng.uniform();  // stays within [6, 7] < factor 2 of max
        h.push_back(r);
    }
    CHECK_FALSE(rank_collapse_flag(h, 20, 0.5));
}

TEST_CASE("metrics export writes the exact header and empty history cleanly") {
    const std::string dir = temp_dir("empty");
    export_diagnostics({}, dir);
    std::ifstream in(dir + "/metrics.csv");
    REQUIRE(in.is_open());
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line ==
          "step,loss,grad_norm,lambda_min,escape_fired,erank_repr,erank_attn,nuclear_attn,"
          "attn_entropy");
    CHECK_FALSE(std::getline(in, line));
    CHECK(import_metrics(dir + "/metrics.csv").empty());
    std::filesystem::remove_all(dir);
}

TEST_CASE("metrics round-trip preserves every field to full precision") {
    Rng rng(4242);
    std::vector<DiagnosticsRecord> history;
    for (std::size_t i = 0; i < 100; ++i) {
        DiagnosticsRecord r;
        r.step = i;
        r.loss = rng.gauss() * 1e3;
        r.grad_norm = std::abs(rng.gauss());
        if (i % 10 == 0) r.lambda_min = rng.gauss();
        r.escape_fired = (i % 7 == 0);
        if (i % 2 == 0) {
            r.erank_repr = 1.0 + 5.0 * rng.uniform();
            r.erank_attn = 1.0 + 3.0 * rng.uniform();
            r.nuclear_attn = 10.0 * rng.uniform();
            r.attn_entropy = rng.uniform();
        }
        history.push_back(r);
    }
    history[3].loss = 1.0 / 3.0;  // classic shortest-round-trip stress value
    history[4].loss = 0.1;

    const std::string dir = temp_dir("roundtrip");
    export_diagnostics(history, dir);
    const std::vector<DiagnosticsRecord> back = import_metrics(dir + "/metrics.csv");
    REQUIRE(back.size() == history.size());
    for (std::size_t i = 0; i < history.size(); ++i) {
        CHECK(back[i].step == history[i].step);
        CHECK(back[i].loss == history[i].loss);
        CHECK(back[i].grad_norm == history[i].grad_norm);
        CHECK(back[i].lambda_min == history[i].lambda_min);
        CHECK(back[i].escape_fired == history[i].escape_fired);
        CHECK(back[i].erank_repr == history[i].erank_repr);
        CHECK(back[i].erank_attn == history[i].erank_attn);
        CHECK(back[i].nuclear_attn == history[i].nuclear_attn);
        CHECK(back[i].attn_entropy == history[i].attn_entropy);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("0.1 is serialized as the literal shortest decimal") {
    const std::string dir = temp_dir("shortest");
    DiagnosticsRecord r = basic_record(0, 0.1);
    r.grad_norm = 0.25;
    export_diagnostics({r}, dir);
    std::ifstream in(dir + "/metrics.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(row == "0,0.1,0.25,,0,,,,");
    std::filesystem::remove_all(dir);
}

TEST_CASE("spectra are written per flagged step and round-trip") {
    const std::string dir = temp_dir("spectra");
    std::vector<DiagnosticsRecord> history;
    DiagnosticsRecord r0 = basic_record(0, 1.0);
    history.push_back(r0);
    DiagnosticsRecord r50 = basic_record(50, 0.5);
    r50.spectrum_repr = SingularSpectrum({3.0, 1.0, 0.25}, 4, 3);
    history.push_back(r50);
    export_diagnostics(history, dir);

    CHECK_FALSE(std::filesystem::exists(dir + "/spectrum_0.csv"));
    REQUIRE(std::filesystem::exists(dir + "/spectrum_50.csv"));
    const std::vector<double> sigma = import_spectrum(dir + "/spectrum_50.csv");
    REQUIRE(sigma.size() == 3);
    CHECK(sigma[0] == 3.0);
    CHECK(sigma[1] == 1.0);
    CHECK(sigma[2] == 0.25);
    std::filesystem::remove_all(dir);
}

TEST_CASE("export and import fail with the path in the message") {
    try {
        export_diagnostics({}, "/nonexistent_dir_for_sure_xyz");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("/nonexistent_dir_for_sure_xyz") !=
              std::string::npos);
    }
    CHECK_THROWS_AS(import_metrics("/nonexistent_dir_for_sure_xyz/metrics.csv"), IoError);

    // Corrupt header.
    const std::string dir = temp_dir("badheader");
    {
        std::ofstream out(dir + "/metrics.csv");
        out << "step,loss\n";
    }
    CHECK_THROWS_AS(import_metrics(dir + "/metrics.csv"), IoError);
    std::filesystem::remove_all(dir);
}
