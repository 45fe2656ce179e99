#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace radrep::cli;

namespace {

void add_config(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "Configuration file (JSON, // comments allowed)")->check(CLI::ExistingFile);
}

void add_out(CLI::App* cmd, Common& c, const std::string& what) { cmd->add_option("--out", c.out, what); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structured CT reports from per-voxel annotations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "radrep 0.1.0");
    Common c;

    auto* report = app.add_subcommand("report", "Build structured reports for one or more case manifests");
    std::vector<std::string> manifests;
    report->add_option("manifests", manifests, "Manifest files or directories")->required();
    add_config(report, c);
    add_out(report, c, "Output directory");
    report->add_option("--mode", c.mode, "ground_truth_masks or automated");
    report->add_option("--jobs", c.jobs, "Cases processed concurrently")->check(CLI::PositiveNumber);

    auto* narrative = app.add_subcommand("narrative", "Rewrite a structured report in the style of example reports");
    std::string report_path, examples_dir, notes_path;
    narrative->add_option("report", report_path, "Structured report JSON")->required()->check(CLI::ExistingFile);
    narrative->add_option("--examples", examples_dir, "Directory with labels.csv and <id>.txt reports")->required();
    add_config(narrative, c);
    add_out(narrative, c, "Output directory");

    auto* fuse = app.add_subcommand("fuse", "Merge clinical notes into a structured report");
    fuse->add_option("report", report_path, "Structured report JSON")->required()->check(CLI::ExistingFile);
    fuse->add_option("--notes", notes_path, "Clinical notes text file")->required()->check(CLI::ExistingFile);
    add_config(fuse, c);
    add_out(fuse, c, "Output directory");

    auto* evaluate = app.add_subcommand("evaluate", "Score predicted tumour labels against truth labels");
    std::string pred_dir, truth_csv;
    bool as_json = false;
    evaluate->add_option("predictions", pred_dir, "Directory of <id>.report.json or <id>.labels.txt")->required();
    evaluate->add_option("truth", truth_csv, "CSV: case_id,liver,kidney,pancreas[,<organ>_size_cm]")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_flag("--json", as_json, "Write JSON instead of CSV");
    add_config(evaluate, c);
    add_out(evaluate, c, "Output file (default: stdout)");

    auto* phantom = app.add_subcommand("phantom", "Write a synthetic case: volume, masks, truth and manifest");
    std::string scenario;
    std::optional<std::uint64_t> seed;
    bool list = false;
    phantom->add_option("scenario", scenario, "Scenario name or PhantomSpec JSON file");
    phantom->add_option("--seed", seed, "Override the HU noise seed");
    phantom->add_flag("--list", list, "List scenario names");
    add_out(phantom, c, "Output directory; the case goes to <out>/<name>");

    auto* measure = app.add_subcommand("measure", "WHO diameters of every tumour instance in a mask");
    std::string mask_path, volume_path, organ = "liver";
    measure->add_option("mask", mask_path, "Tumour mask NIfTI")->required();
    measure->add_option("--volume", volume_path, "CT volume for HU statistics");
    measure->add_option("--organ", organ, "liver, pancreas or kidney");
    add_config(measure, c);

    auto* stage = app.add_subcommand("stage", "T stage of the largest PDAC instance");
    std::string tumor_path;
    std::vector<std::string> vessels;
    stage->add_option("tumor", tumor_path, "PDAC mask NIfTI")->required();
    stage->add_option("--vessel", vessels, "NAME=PATH for SMA, CHA, CA, SA (repeatable)");
    stage->add_option("--volume", volume_path, "CT volume for HU statistics");
    add_config(stage, c);

    auto* subseg = app.add_subcommand("subsegment", "Split a pancreas mask into head, body and tail");
    std::string pancreas_path, sma_path;
    subseg->add_option("pancreas", pancreas_path, "Pancreas mask NIfTI")->required();
    subseg->add_option("--sma", sma_path, "SMA mask NIfTI")->required();
    add_out(subseg, c, "Output directory for the three masks");

    auto* denoise = app.add_subcommand("denoise", "Remove structures thinner than a 3x3x3 cube from a mask");
    std::string denoise_organ;
    denoise->add_option("mask", mask_path, "Mask NIfTI")->required();
    denoise->add_option("--organ", denoise_organ, "Apply the presence threshold of liver, pancreas, kidney or metastases");
    add_config(denoise, c);
    add_out(denoise, c, "Output mask path");

    auto* config = app.add_subcommand("config", "Print the annotated default configuration");
    bool check = false;
    config->add_flag("--check", check, "Validate --config and print its canonical form");
    add_config(config, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*report) return cmd_report(c, manifests);
        if (*narrative) return cmd_narrative(c, report_path, examples_dir);
        if (*fuse) return cmd_fuse(c, report_path, notes_path);
        if (*evaluate) return cmd_evaluate(c, pred_dir, truth_csv, as_json);
        if (*phantom) {
            if (!list && scenario.empty()) {
                std::cerr << "phantom: give a scenario name or spec file, or --list\n";
                return kUsage;
            }
            return cmd_phantom(c, scenario, seed, list);
        }
        if (*measure) return cmd_measure(c, mask_path, volume_path, organ);
        if (*stage) return cmd_stage(c, tumor_path, vessels, volume_path);
        if (*subseg) return cmd_subsegment(c, pancreas_path, sma_path);
        if (*denoise) return cmd_denoise(c, mask_path, denoise_organ);
        if (*config) return cmd_config(c, check);
    } catch (const radrep::Error& e) {
        std::cerr << "error [" << radrep::to_string(e.code()) << "]: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
