#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "eeo/config.hpp"
#include "eeo/errors.hpp"
#include "eeo/experiment.hpp"
#include "eeo/rng.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

int cmd_run(const std::string& config_path, const std::string& out_override) {
    eeo::RunConfig cfg = eeo::parse_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    const eeo::RunLog log = eeo::run_experiment(cfg);

    std::cout << "experiment " << cfg.experiment << " (" << eeo::task_name(cfg.task)
              << ", seed " << cfg.seed << ")\n";
    std::cout << "  steps " << log.steps_run << ", escapes " << log.escaped_count
              << ", final loss " << log.final_loss << "\n";
    const auto print_split = [](const char* name,
                                const std::optional<eeo::SplitMetrics>& m) {
        if (m) {
            std::cout << "  " << name << " mse " << m->mse << ", mae " << m->mae
                      << "\n";
        }
    };
    print_split("train", log.train);
    print_split("val  ", log.val);
    print_split("test ", log.test);
    print_split("repeat-last baseline (test)", log.baseline_test);
    std::cout << "  outputs in " << log.run_dir << "\n";
    return 0;
}

int cmd_diagnose(const std::string& checkpoint_path, const std::string& config_path) {
    const eeo::RunConfig cfg = eeo::parse_config(config_path);
    eeo::diagnose_checkpoint(cfg, checkpoint_path, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"escape-explore optimizer: experiment runner, bound checks, and "
                 "checkpoint diagnostics"};
    app.require_subcommand(1);

    std::string run_config_path;
    std::string out_override;
    CLI::App* run_cmd =
        app.add_subcommand("run", "run one experiment from a key = value config file");
    run_cmd->add_option("config", run_config_path, "path to the config file")
        ->required();
    run_cmd->add_option("--out", out_override, "override out_dir from the config");

    std::string which;
    std::uint64_t seed = 42;
    CLI::App* lemma_cmd = app.add_subcommand(
        "lemma-check", "verify the optimizer's supporting bounds empirically");
    lemma_cmd->add_option("which", which, "lemma2 | lemma3 | lemma4 | all")->required();
    lemma_cmd->add_option("--seed", seed, "base seed for the seeded points");

    CLI::App* grad_cmd = app.add_subcommand(
        "gradcheck", "audit every analytic gradient against central differences");

    std::string checkpoint_path;
    std::string diag_config_path;
    CLI::App* diag_cmd = app.add_subcommand(
        "diagnose", "inspect a saved checkpoint under a config's task objective");
    diag_cmd->add_option("checkpoint", checkpoint_path, "binary checkpoint path")
        ->required();
    diag_cmd->add_option("config", diag_config_path, "config describing the task")
        ->required();

    CLI::App* ver_cmd =
        app.add_subcommand("version", "print version and generator identifiers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*ver_cmd) {
            std::cout << "eeo " << kVersion << "\n"
                      << "generator " << eeo::kGeneratorId << "\n";
            return 0;
        }
        if (*grad_cmd) return eeo::gradient_check(std::cout) ? 0 : 1;
        if (*lemma_cmd) return eeo::lemma_check(which, seed, std::cout) ? 0 : 1;
        if (*run_cmd) return cmd_run(run_config_path, out_override);
        if (*diag_cmd) return cmd_diagnose(checkpoint_path, diag_config_path);
    } catch (const eeo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const eeo::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const eeo::ValidationError& e) {
        std::cerr << "invalid request: " << e.what() << "\n";
        return 2;
    } catch (const eeo::ShapeError& e) {
        std::cerr << "shape mismatch: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
