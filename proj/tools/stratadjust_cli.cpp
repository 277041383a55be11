// Command-line front end: `simulate` runs Monte Carlo scenario grids from a
// config file, `analyze` estimates the average treatment effect on a CSV
// dataset, `truth` prints a model's true effect.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "stratadjust/harness.hpp"

using namespace stratadjust;

namespace {

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& format, int jobs) {
    const auto scenarios = parse_config_file(config_path);
    std::vector<SummaryRow> rows;
    for (const auto& cfg : scenarios) {
        SimulationSummary s = run_scenario(cfg, jobs);
        SummaryRow row;
        row.model = std::to_string(cfg.model);
        row.estimator = cfg.adjuster.label() + (cfg.use_crossfit ? "+ss" : "");
        row.randomizer = to_string(cfg.randomizer.kind);
        row.summary = s;
        rows.push_back(row);
        std::fprintf(stderr, "[%s] model %d %s/%s: bias=%.3f sd=%.3f se=%.3f cp=%.3f (%.1fs)\n",
                     cfg.name.c_str(), cfg.model, row.estimator.c_str(),
                     row.randomizer.c_str(), s.bias, s.sd, s.se, s.cp, s.seconds);
    }
    const std::string table =
        emit_table(rows, format == "markdown" ? TableFormat::markdown : TableFormat::csv);
    if (out_path.empty() || out_path == "-") {
        std::cout << table;
    } else {
        std::ofstream out(out_path);
        if (!out) throw ValidationError("cannot write '" + out_path + "'");
        out << table;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covariate-adjusted treatment effect estimation under stratified randomization"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "run Monte Carlo scenarios from a config file");
    std::string config_path, out_path, format = "csv";
    int jobs = 0;
    sim->add_option("--config", config_path, "scenario config file")->required();
    sim->add_option("--out", out_path, "output file (default: stdout)");
    sim->add_option("--format", format, "csv|markdown")
        ->check(CLI::IsMember({"csv", "markdown"}));
    sim->add_option("--jobs", jobs, "worker threads (default: all cores)");

    auto* ana = app.add_subcommand("analyze", "estimate the treatment effect on a CSV dataset");
    std::string data_path, adjuster = "ols";
    AnalyzeOptions opts;
    bool json = false;
    std::vector<std::string> hyper_kv;
    ana->add_option("--data", data_path, "CSV file with outcome/arm/stratum columns")->required();
    ana->add_option("--adjuster", adjuster,
                    "zero|ols|lasso|kernel|nspline|cart|rf|gbrt|mlp|oracle");
    ana->add_flag("--stratum-specific", opts.stratum_specific, "fit per stratum");
    ana->add_option("--crossfit", opts.crossfit_folds, "sample-splitting fold count M");
    ana->add_option("--pi", opts.pi, "target treated proportion (default: observed)");
    ana->add_option("--level", opts.level, "confidence level");
    ana->add_option("--seed", opts.seed, "seed for fold partition and stochastic fitters");
    ana->add_option("--hyper", hyper_kv, "hyperparameter override key=value (repeatable)");
    ana->add_flag("--json", json, "emit the estimate as one JSON line");

    auto* tru = app.add_subcommand("truth", "print a model's true average treatment effect");
    int model = 1;
    long mc_draws = 1000000;
    std::uint64_t truth_seed = 777;
    tru->add_option("--model", model, "model id 1..8")->required();
    tru->add_option("--mc", mc_draws, "Monte Carlo draws (models without closed form)");
    tru->add_option("--seed", truth_seed, "Monte Carlo seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_path, format, jobs);
        if (ana->parsed()) {
            for (const auto& item : hyper_kv) {
                const auto eq = item.find('=');
                if (eq == std::string::npos)
                    throw ValidationError("--hyper expects key=value, got '" + item + "'");
                opts.hyper.emplace_back(item.substr(0, eq), item.substr(eq + 1));
            }
            const AnalyzeReport report = analyze(data_path, adjuster, opts);
            std::cout << report.text;
            if (json) std::cout << to_json_line(report.estimate) << "\n";
            return 0;
        }
        if (tru->parsed()) {
            if (model == 1 || model == 5) {
                std::printf("model %d: tau = %.10g (closed form)\n", model,
                            true_ate_closed_form(model));
            } else {
                const auto t = true_ate_monte_carlo(model, mc_draws, truth_seed);
                std::printf("model %d: tau = %.10g (monte carlo, %ld draws, se %.3g)\n", model,
                            t.value, t.n_draws, t.se);
            }
            return 0;
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const EstimationError& e) {
        std::fprintf(stderr, "estimation aborted: %s\n", e.what());
        return 3;
    }
    return 0;
}
