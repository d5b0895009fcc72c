#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "eeo/dataset.hpp"
#include "eeo/errors.hpp"
#include "eeo/experiment.hpp"
#include "eeo/landscapes.hpp"
#include "eeo/rng.hpp"

using namespace eeo;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
    const std::string dir = "/tmp/eeo_exp_tests/" + name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.is_open());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunConfig config_from(const std::string& text) {
    return parse_config_text(text, "inline.cfg");
}

}  // namespace

TEST_CASE("checkpoints round-trip bit for bit") {
    const std::string dir = fresh_dir("ckpt");
    Rng rng = Rng::stream(99, stream::kStart, 0);
    std::vector<double> values(1000);
    for (double& x : values) x = rng.gauss() * std::pow(10.0, rng.gauss() * 3.0);
    values[0] = -0.0;
    values[1] = 1e-307;  // subnormal territory survives too
    const ParamVector w(values);

    const std::string path = dir + "/w.bin";
    checkpoint_save(path, w);
    const ParamVector back = checkpoint_load(path);
    REQUIRE(back.dim() == w.dim());
    for (std::size_t i = 0; i < w.dim(); ++i) {
        const double x = w[i];
        const double y = back[i];
        std::uint64_t a = 0, b = 0;
        std::memcpy(&a, &x, 8);
        std::memcpy(&b, &y, 8);
        CHECK(a == b);  // bit equality, stricter than ==
    }
    CHECK(fs::file_size(path) == 8 + 8 * w.dim());
}

TEST_CASE("checkpoint_load validates dimension, size, and finiteness") {
    const std::string dir = fresh_dir("ckpt_bad");
    const ParamVector w(std::vector<double>{1.0, 2.0, 3.0});
    checkpoint_save(dir + "/w.bin", w);

    CHECK(checkpoint_load(dir + "/w.bin", 3).dim() == 3);
    CHECK_THROWS_AS(checkpoint_load(dir + "/w.bin", 5), ShapeError);
    CHECK_THROWS_AS(checkpoint_load(dir + "/missing.bin"), IoError);

    {
        std::ofstream out(dir + "/empty.bin", std::ios::binary);
    }
    CHECK_THROWS_AS(checkpoint_load(dir + "/empty.bin"), IoError);

    {
        // Header promises 4 entries, payload carries 2.
        std::ofstream out(dir + "/short.bin", std::ios::binary);
        const std::uint64_t dim = 4;
        out.write(reinterpret_cast<const char*>(&dim), 8);
        const double x = 1.5;
        out.write(reinterpret_cast<const char*>(&x), 8);
        out.write(reinterpret_cast<const char*>(&x), 8);
    }
    CHECK_THROWS_AS(checkpoint_load(dir + "/short.bin"), IoError);

    {
        std::ofstream out(dir + "/nan.bin", std::ios::binary);
        const std::uint64_t dim = 1;
        out.write(reinterpret_cast<const char*>(&dim), 8);
        const double x = std::numeric_limits<double>::quiet_NaN();
        out.write(reinterpret_cast<const char*>(&x), 8);
    }
    CHECK_THROWS_AS(checkpoint_load(dir + "/nan.bin"), NumericError);
    CHECK_THROWS_AS(checkpoint_save(dir + "/reject.bin",
                                    ParamVector(std::vector<double>{
                                        std::numeric_limits<double>::infinity()})),
                    NumericError);
}

TEST_CASE("a saddle run escapes and leaves the full artifact set behind") {
    const std::string out = fresh_dir("saddle");
    const RunConfig cfg = config_from(
        "experiment = saddle_probe\n"
        "task = landscape\n"
        "landscape.name = saddle\n"
        "seed = 2024\n"
        "out_dir = " + out + "\n"
        "optimizer.eta = 0.05\n"
        "optimizer.negcur_kick = 2\n"
        "optimizer.check_every = 5\n"
        "optimizer.probe_iters = 40\n"
        "optimizer.beta = 0.5\n"
        "optimizer.max_steps = 100\n");
    const RunLog log = run_experiment(cfg);

    CHECK(log.escaped_count >= 1);
    CHECK(log.final_loss < -0.5);
    CHECK(log.steps_run == 100);
    CHECK(log.history.size() == 100);
    CHECK(log.config_echo == echo_config(cfg));
    CHECK_FALSE(log.train.has_value());

    const std::string run_dir = out + "/saddle_probe";
    CHECK(fs::exists(run_dir + "/metrics.csv"));
    CHECK(fs::exists(run_dir + "/run.json"));
    const ParamVector final = checkpoint_load(run_dir + "/checkpoint.bin", 2);
    CHECK(final == log.final_params);

    // Some step actually fired: the exported metrics carry it.
    const auto history = import_metrics(run_dir + "/metrics.csv");
    bool any_fired = false;
    for (const auto& rec : history) any_fired = any_fired || rec.escape_fired;
    CHECK(any_fired);

    const std::string json = slurp(run_dir + "/run.json");
    CHECK(json.find("\"task\": \"landscape\"") != std::string::npos);
    CHECK(json.find(kGeneratorId) != std::string::npos);
    CHECK(json.find("\"escaped_count\"") != std::string::npos);
}

TEST_CASE("identical configs give byte-identical metrics even across out_dirs") {
    const std::string out_a = fresh_dir("det_a");
    const std::string out_b = fresh_dir("det_b");
    const std::string body =
        "experiment = det\n"
        "task = landscape\n"
        "landscape.name = two_well\n"
        "seed = 31\n"
        "optimizer.eta = 0.02\n"
        "optimizer.max_steps = 120\n";
    run_experiment(config_from(body + "out_dir = " + out_a + "\n"));
    run_experiment(config_from(body + "out_dir = " + out_b + "\n"));
    CHECK(slurp(out_a + "/det/metrics.csv") == slurp(out_b + "/det/metrics.csv"));
    CHECK(slurp(out_a + "/det/checkpoint.bin") == slurp(out_b + "/det/checkpoint.bin"));
}

TEST_CASE("disabling every mechanism reproduces plain gradient descent exactly") {
    const std::string out_a = fresh_dir("gd_a");
    const std::string out_b = fresh_dir("gd_b");
    const std::string common =
        "experiment = gd\n"
        "task = landscape\n"
        "landscape.name = quadratic\n"
        "landscape.dim = 4\n"
        "seed = 8\n"
        "optimizer.eta = 0.05\n"
        "optimizer.max_steps = 40\n";
    // Route one: the ablation switch. Route two: zeroing each mechanism by hand.
    const RunLog ablated = run_experiment(
        config_from(common + "out_dir = " + out_a + "\nablation = none\n"));
    run_experiment(config_from(common + "out_dir = " + out_b +
                               "\noptimizer.rho = 0\noptimizer.negcur_kick = 0\n"
                               "optimizer.temperature = 0\noptimizer.beta = 0\n"));
    CHECK(slurp(out_a + "/gd/metrics.csv") == slurp(out_b + "/gd/metrics.csv"));

    // Both must equal a hand-rolled GD loop on the same landscape and start.
    QuadraticLandscape quad(Matrix::identity(4), {});
    Rng rng = Rng::stream(8, stream::kStart, 0);
    std::vector<double> start(4);
    for (double& x : start) x = rng.gauss();
    ParamVector w(start);
    const auto records = import_metrics(out_a + "/gd/metrics.csv");
    REQUIRE(records.size() == 40);
    for (std::size_t t = 0; t < records.size(); ++t) {
        const ParamVector g = quad.grad(w);
        CHECK(records[t].grad_norm == norm2(g));
        w = axpy(w, -0.05, g);
        CHECK(records[t].loss == quad.eval(w));
        CHECK_FALSE(records[t].escape_fired);
    }
    CHECK(ablated.final_params == w);
}

TEST_CASE("the trained forecaster beats the repeat-last baseline on held-out data") {
    const std::string out = fresh_dir("sine");
    const RunConfig cfg = config_from(
        "experiment = sine_fit\n"
        "task = forecast\n"
        "seed = 3\n"
        "out_dir = " + out + "\n"
        "data.synthetic_len = 260\n"
        "data.lookback = 16\n"
        "data.horizon = 4\n"
        "model.d = 6\n"
        "model.d_m = 4\n"
        "model.patch_len = 8\n"
        "optimizer.eta = 0.05\n"
        "optimizer.probe_iters = 10\n"
        "optimizer.check_every = 25\n"
        "optimizer.beta = 0.9\n"
        "optimizer.max_steps = 400\n"
        "diag.every = 20\n");
    const RunLog log = run_experiment(cfg);

    REQUIRE(log.train.has_value());
    REQUIRE(log.val.has_value());
    REQUIRE(log.test.has_value());
    REQUIRE(log.baseline_test.has_value());
    CHECK(log.test->mse < log.baseline_test->mse);
    CHECK(log.train->mse < 0.5);  // far below the ~1.0 variance of the data

    // Model-task records carry the representation/attention diagnostics.
    CHECK(log.history.front().erank_repr.has_value());
    CHECK(log.history.front().attn_entropy.has_value());
    CHECK(fs::exists(out + "/sine_fit/spectrum_0.csv"));

    const std::string json = slurp(out + "/sine_fit/run.json");
    CHECK(json.find("\"baseline_test\"") != std::string::npos);
}

TEST_CASE("mutating the test region never touches training-phase outputs") {
    const std::string dir = fresh_dir("leakage");
    const Matrix series = gen_sine_mixture(240, 7);
    SeriesData data;
    data.columns = {"a", "b", "c"};
    data.values = series;
    save_series_csv(dir + "/clean.csv", data);

    // Scale the test region (rows past 0.8 * 240 = 192) out of recognition.
    SeriesData mutated = data;
    for (std::size_t t = 192; t < 240; ++t) {
        for (std::size_t v = 0; v < 3; ++v) mutated.values(t, v) *= 3.0;
    }
    save_series_csv(dir + "/mutated.csv", mutated);

    const std::string body =
        "experiment = leak\n"
        "task = forecast\n"
        "seed = 12\n"
        "data.lookback = 16\n"
        "data.horizon = 4\n"
        "model.d = 4\n"
        "model.d_m = 4\n"
        "model.patch_len = 8\n"
        "optimizer.max_steps = 30\n"
        "optimizer.check_every = 100\n";
    const RunLog clean = run_experiment(config_from(
        body + "out_dir = " + dir + "/ca\ndata.path = " + dir + "/clean.csv\n"));
    const RunLog dirty = run_experiment(config_from(
        body + "out_dir = " + dir + "/cb\ndata.path = " + dir + "/mutated.csv\n"));

    CHECK(slurp(dir + "/ca/leak/metrics.csv") == slurp(dir + "/cb/leak/metrics.csv"));
    CHECK(clean.final_params == dirty.final_params);
    CHECK(clean.train->mse == dirty.train->mse);
    CHECK(clean.train->mae == dirty.train->mae);
    CHECK(clean.val->mse == dirty.val->mse);
    CHECK(clean.test->mse != dirty.test->mse);
}

TEST_CASE("an attention-alignment run descends and logs attention diagnostics") {
    const std::string out = fresh_dir("align");
    const RunConfig cfg = config_from(
        "experiment = align_smoke\n"
        "task = attention_align\n"
        "seed = 5\n"
        "out_dir = " + out + "\n"
        "model.d = 6\n"
        "model.d_m = 4\n"
        "model.align_windows = 2\n"
        "model.align_tokens = 5\n"
        "optimizer.eta = 0.2\n"
        "optimizer.rho = 0.02\n"
        "optimizer.temperature = 1e-6\n"
        "optimizer.beta = 0.5\n"
        "optimizer.max_steps = 60\n");
    const RunLog log = run_experiment(cfg);

    REQUIRE(log.history.size() == 60);
    CHECK(log.history.back().loss < log.history.front().loss);
    CHECK(log.final_loss < log.history.front().loss);
    CHECK(log.history.front().attn_entropy.has_value());
    CHECK(log.history.front().erank_attn.has_value());
    CHECK_FALSE(log.history.front().erank_repr.has_value());
    CHECK_FALSE(log.train.has_value());
    CHECK(checkpoint_load(out + "/align_smoke/checkpoint.bin", 2 * 6 * 4).dim() == 48);
}

TEST_CASE("failures carry the experiment name and sweep partial outputs away") {
    const std::string out = fresh_dir("fail");
    const std::string body =
        "experiment = broken\n"
        "task = forecast\n"
        "data.lookback = 32\n"
        "model.patch_len = 7\n"  // 7 does not divide 32
        "out_dir = " + out + "/fresh\n";
    try {
        run_experiment(config_from(body));
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("experiment 'broken'") != std::string::npos);
        CHECK(msg.find("patch_len") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(out + "/fresh/broken"));  // created, then swept

    // A pre-existing directory keeps its unrelated content on failure.
    fs::create_directories(out + "/kept/broken");
    {
        std::ofstream keep(out + "/kept/broken/notes.txt");
        keep << "unrelated\n";
    }
    CHECK_THROWS_AS(
        run_experiment(config_from(body.substr(0, body.find("out_dir")) +
                                   "out_dir = " + out + "/kept\n")),
        ValidationError);
    CHECK(fs::exists(out + "/kept/broken/notes.txt"));
    CHECK_FALSE(fs::exists(out + "/kept/broken/metrics.csv"));
    CHECK_FALSE(fs::exists(out + "/kept/broken/run.json"));
}

TEST_CASE("the robust-expansion and noisy-descent lemma checks pass") {
    for (const std::uint64_t seed : {42ull, 7ull, 1234ull}) {
        std::ostringstream r2;
        CHECK(lemma_check("lemma2", seed, r2));
        CHECK(r2.str().find("lemma2: PASS") != std::string::npos);

        std::ostringstream r4;
        CHECK(lemma_check("lemma4", seed, r4));
        CHECK(r4.str().find("lemma4: PASS") != std::string::npos);
    }
}

TEST_CASE("the curvature-consistency check reports honestly on cubics") {
    std::ostringstream report;
    CHECK_FALSE(lemma_check("lemma3", 42, report));
    const std::string text = report.str();
    CHECK(text.find("[FAIL] halving alpha quarters") != std::string::npos);
    CHECK(text.find("exact on cubic") != std::string::npos);
    CHECK(text.find("escape kick at a near-critical saddle") != std::string::npos);
    CHECK(text.find("[PASS] escape kick") != std::string::npos);
    CHECK(text.find("lemma3: FAIL") != std::string::npos);

    std::ostringstream all;
    CHECK_FALSE(lemma_check("all", 42, all));  // lemma3 drags the sweep down
    CHECK(all.str().find("lemma-check: FAIL") != std::string::npos);

    std::ostringstream sink;
    CHECK_THROWS_AS(lemma_check("lemma9", 1, sink), ValidationError);
}

TEST_CASE("the gradient audit clears every objective family") {
    std::ostringstream report;
    CHECK(gradient_check(report));
    const std::string text = report.str();
    CHECK(std::count(text.begin(), text.end(), '\n') >= 9);
    CHECK(text.find("[FAIL]") == std::string::npos);
    CHECK(text.find("forecast encoder") != std::string::npos);
    CHECK(text.find("attention alignment") != std::string::npos);
    CHECK(text.find("gradcheck: PASS") != std::string::npos);
}

TEST_CASE("checkpoint diagnosis reports loss, curvature, and split metrics") {
    const std::string out = fresh_dir("diagnose");

    RunConfig land = config_from(
        "experiment = probe\n"
        "task = landscape\n"
        "landscape.name = two_well\n"
        "landscape.dim = 1\n"
        "seed = 7\n"
        "optimizer.eta = 0.005\n"
        "optimizer.beta = 0.5\n"
        "optimizer.max_steps = 200\n"
        "out_dir = " + out + "/land\n");
    const RunLog land_log = run_experiment(land);

    std::ostringstream land_report;
    diagnose_checkpoint(land, land_log.checkpoint_path, land_report);
    const std::string lt = land_report.str();
    CHECK(lt.find("task landscape, dim 1") != std::string::npos);
    CHECK(lt.find("loss ") != std::string::npos);
    CHECK(lt.find("min-curvature estimate") != std::string::npos);

    RunConfig fc = config_from(
        "experiment = probe\n"
        "task = forecast\n"
        "seed = 3\n"
        "data.synthetic_len = 200\n"
        "data.lookback = 16\n"
        "data.horizon = 4\n"
        "model.d = 4\n"
        "model.d_m = 4\n"
        "model.patch_len = 8\n"
        "optimizer.max_steps = 20\n"
        "optimizer.check_every = 100\n"
        "out_dir = " + out + "/fc\n");
    const RunLog fc_log = run_experiment(fc);

    std::ostringstream fc_report;
    diagnose_checkpoint(fc, fc_log.checkpoint_path, fc_report);
    const std::string ft = fc_report.str();
    CHECK(ft.find("task forecast") != std::string::npos);
    CHECK(ft.find("attention: erank") != std::string::npos);
    CHECK(ft.find("representation: erank") != std::string::npos);
    CHECK(ft.find("train mse") != std::string::npos);
    CHECK(ft.find("test  mse") != std::string::npos);

    // The report's loss line reflects the saved parameters, not a rerun.
    CHECK_THROWS_AS(
        diagnose_checkpoint(fc, land_log.checkpoint_path, fc_report), ShapeError);
}
