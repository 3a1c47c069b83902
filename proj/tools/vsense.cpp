#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vsense/cli.hpp"

using namespace vsense;

int main(int argc, char** argv) {
    CLI::App app{"virtual flame sensing: dataset generation, training, and evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;
    std::vector<std::string> sets;
    app.add_option("-c,--config", config_path, "JSON run config; built-in defaults when absent");
    app.add_option("-o,--out", out_flag, "output directory (overrides config and VSENSE_OUT)");
    app.add_option("-s,--set", sets,
                   "override a config field, e.g. training.VS1.epochs=8 or seeds=1,2,3");

    auto* c_generate = app.add_subcommand("generate", "synthesize the dataset and its manifest");
    auto* c_pretrain =
        app.add_subcommand("pretrain", "train the frame autoencoder (AE) for every seed");
    std::string train_regime;
    auto* c_train = app.add_subcommand("train", "train one regime for every seed");
    c_train->add_option("regime", train_regime, "AE|VS1|VS1A|VS1B|VS2|VS2A|XMODAL|IMG_CLS|TS_CLS")
        ->required();
    auto* c_evaluate =
        app.add_subcommand("evaluate", "score all selected regimes and write the report");
    auto* c_report = app.add_subcommand("report", "re-render the text table from eval_report.json");
    std::string rec_regime;
    uint32_t rec_condition = 0;
    int rec_first = 0, rec_count = 1;
    auto* c_reconstruct =
        app.add_subcommand("reconstruct", "dump paired true/reconstructed frames as PGM");
    c_reconstruct->add_option("regime", rec_regime, "reconstructing regime")->required();
    c_reconstruct->add_option("condition", rec_condition, "condition id")->required();
    c_reconstruct->add_option("--first", rec_first, "first frame position within the condition");
    c_reconstruct->add_option("--count", rec_count, "number of frames to dump");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad usage is a config error
    }

    try {
        RunConfig cfg = config_path.empty() ? default_run_config() : load_run_config(config_path);
        if (const char* env = std::getenv("VSENSE_OUT")) cfg.out_dir = env;
        for (const auto& s : sets) apply_override(cfg, s);  // flags override the env var
        if (!out_flag.empty()) cfg.out_dir = out_flag;
        validate_run_config(cfg);

        if (c_generate->parsed()) {
            const auto manifest = cmd_generate(cfg);
            std::cout << "dataset " << manifest["dataset_hash"].get<std::string>() << ": "
                      << manifest["train_samples"].get<size_t>() << " train / "
                      << manifest["test_samples"].get<size_t>() << " test samples -> "
                      << OutPaths{cfg.out_dir}.dataset() << std::endl;
        } else if (c_pretrain->parsed()) {
            cmd_pretrain(cfg);
        } else if (c_train->parsed()) {
            cmd_train(cfg, regime_from_name(train_regime));
        } else if (c_evaluate->parsed()) {
            std::cout << cmd_evaluate(cfg).table;
        } else if (c_report->parsed()) {
            std::cout << cmd_report(cfg);
        } else if (c_reconstruct->parsed()) {
            const auto files =
                cmd_reconstruct(cfg, regime_from_name(rec_regime), rec_condition, rec_first,
                                rec_count);
            std::cout << files.size() << " files under " << OutPaths{cfg.out_dir}.recon_dir()
                      << std::endl;
        }
        return 0;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const parameter_error& e) {
        std::cerr << "parameter error: " << e.what() << std::endl;
        return 2;
    } catch (const dependency_error& e) {
        std::cerr << "dependency error: " << e.what() << std::endl;
        return 3;
    } catch (const invariant_violation& e) {
        std::cerr << "invariant violation: " << e.what() << std::endl;
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
