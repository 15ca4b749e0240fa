// Command-line front end: run an experiment, re-summarize results, or
// extract plot data for one figure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dropin/dropin.hpp"

namespace fs = std::filesystem;

namespace {

void dump_cohorts(const dropin::ExperimentPlan& plan, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& sc : plan.scenarios)
        for (double g : plan.gamma_grid) {
            const auto c = dropin::prepare_scenario(sc, g, plan.intercept_solver, plan.resolve_intercepts_per_gamma);
            const auto seed = dropin::iteration_seed(plan.master_seed, c.name, g, 0);
            std::string stem = c.name + "_gamma" + dropin::format_double(g);
            for (auto& ch : stem)
                if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
            const auto dev = dropin::generate_development(c, dropin::derive_seed(seed, {0}));
            dropin::write_csv(dev, (dir / (stem + "_dev.csv")).string());
            dropin::write_csv(dropin::generate_test_mt(c, dropin::derive_seed(seed, {1})), (dir / (stem + "_mt.csv")).string());
            dropin::write_csv(dropin::generate_test_ntt(c, dropin::derive_seed(seed, {2})), (dir / (stem + "_ntt.csv")).string());
            const auto h = dropin::TreatmentHistoryTable::from_cohort(dev);
            const auto w = dropin::compute_stabilized_weights(h, dropin::fit_treatment_models(h));
            dropin::write_weights_csv(w, (dir / (stem + "_weights.csv")).string());
        }
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw dropin::IoError("cannot open '" + path + "'");
    return is;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Treatment drop-in simulation study: cohorts, prediction strategies, MSM weights, evaluation"};
    app.require_subcommand(1);

    std::string config_path, profile = "desk", out_dir = "out", dump_dir;
    std::optional<dropin::Seed> seed;
    std::optional<int> workers, iterations;
    auto* run = app.add_subcommand("run", "Run the Monte Carlo experiment");
    run->add_option("--config", config_path, "JSON experiment config (defaults when omitted)");
    run->add_option("--profile", profile, "Iteration profile")->check(CLI::IsMember({"desk", "full"}));
    run->add_option("--seed", seed, "Master seed");
    run->add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");
    run->add_option("--iterations", iterations, "Override the profile's iteration count");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--dump-cohorts", dump_dir, "Also write iteration-0 cohorts and weights as CSV here");

    std::string results_path, summary_path, figure;
    auto* summarize = app.add_subcommand("summarize", "Recompute summary.csv from results.csv");
    summarize->add_option("--results", results_path, "results.csv")->required();
    summarize->add_option("--out", out_dir, "Output directory");

    auto* report = app.add_subcommand("report", "Write plot data for one figure from summary.csv");
    report->add_option("--summary", summary_path, "summary.csv")->required();
    report->add_option("--figure", figure, "Figure id")->required()->check(CLI::IsMember({"3", "4", "5", "S1", "S2", "S3"}));
    report->add_option("--out", out_dir, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto plan = config_path.empty() ? dropin::config::plan_from_json(nlohmann::json::object(), profile)
                                            : dropin::config::load_plan_file(config_path, profile);
            if (seed) plan.master_seed = *seed;
            if (workers) plan.workers = *workers;
            if (iterations) plan.iterations = *iterations;
            plan.validate();

            const auto echo = dropin::config::plan_to_json(plan).dump(2);
            std::cerr << "running " << plan.scenarios.size() << " scenario(s) x " << plan.gamma_grid.size()
                      << " gamma value(s) x " << plan.iterations << " iteration(s)\n";
            const auto result = dropin::run_experiment(plan);
            dropin::emit_outputs(result, echo, plan.master_seed, out_dir);
            if (!dump_dir.empty()) dump_cohorts(plan, dump_dir);
            std::cerr << "wrote " << result.records.size() << " records to " << out_dir << " in "
                      << dropin::format_double(result.wall_seconds) << " s";
            if (!result.failures.empty()) std::cerr << " (" << result.failures.size() << " failed iterations)";
            std::cerr << '\n';
            if (result.degraded()) std::cerr << "RUN DEGRADED: see run_report.txt\n";
        } else if (*summarize) {
            auto is = open_in(results_path);
            const auto summary = dropin::summarize(dropin::read_results_csv(is));
            fs::create_directories(out_dir);
            std::ofstream os(fs::path(out_dir) / "summary.csv");
            if (!os) throw dropin::IoError("cannot write summary.csv in '" + out_dir + "'");
            dropin::write_summary_csv(summary, os);
        } else if (*report) {
            auto is = open_in(summary_path);
            const auto summary = dropin::read_summary_csv(is);
            const dropin::Figure f = dropin::parse_figure(figure);
            dropin::write_figure_files(summary, out_dir, std::span<const dropin::Figure>(&f, 1));
        }
    } catch (const dropin::Error& e) {
        std::cerr << e.kind() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
