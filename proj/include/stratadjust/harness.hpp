#pragma once

#include <string>
#include <vector>

#include "stratadjust/adjusters.hpp"
#include "stratadjust/crossfit.hpp"
#include "stratadjust/datagen.hpp"
#include "stratadjust/estimators.hpp"
#include "stratadjust/randomizers.hpp"

namespace stratadjust {

// One simulation cell: model x randomizer x adjuster x pi x n x R.
struct ScenarioConfig {
    std::string name = "scenario";
    int model = 1;
    int n = 1000;
    int p = 200; // high-dimensional models only
    double pi = 0.5;
    RandomizerConfig randomizer;
    AdjusterSpec adjuster;
    bool use_crossfit = false;
    int folds = 5;
    int replications = 500;
    double level = 0.95;
    std::uint64_t seed = 20240901;
};

struct SimulationSummary {
    double bias = 0.0;
    double sd = 0.0;   // sample SD of tau_hat across replications (R-1 divisor)
    double se = 0.0;   // mean of estimated SEs
    double cp = 0.0;   // fraction of CIs covering the true effect
    double tau_true = 0.0;
    double mean_tau = 0.0;
    int replications = 0;
    double seconds = 0.0;
};

struct SummaryRow {
    std::string model;
    std::string estimator;
    std::string randomizer;
    SimulationSummary summary;
};

SimulationSummary summarize(const std::vector<EffectEstimate>& estimates, double tau_true);

// Runs every replication of the scenario (parallel over replications with
// per-replication counter-derived seeds; results are ordered by
// replication index, so output is identical for any job count).
SimulationSummary run_scenario(const ScenarioConfig& cfg, int jobs = 0);

// Also returns the per-replication estimates (ordered by index).
SimulationSummary run_scenario_detailed(const ScenarioConfig& cfg, int jobs,
                                        std::vector<EffectEstimate>& estimates);

enum class TableFormat { csv, markdown };

// csv: flat rows Model,Estimator,Randomizer,Bias,SD,SE,CP. markdown: rows
// are model x estimator, column groups one per randomizer. Two-decimal
// rounding in both.
std::string emit_table(const std::vector<SummaryRow>& rows, TableFormat format);

// Flat key=value sections: "[name]" starts a scenario, '#' starts a
// comment. Unknown keys are rejected.
std::vector<ScenarioConfig> parse_config_file(const std::string& path);
ScenarioConfig parse_config_section(const std::vector<std::pair<std::string, std::string>>& kv,
                                    const std::string& name);

struct AnalyzeOptions {
    bool stratum_specific = false;
    int crossfit_folds = 0; // 0: no sample splitting
    double pi = -1.0;       // <0: dataset default
    double level = 0.95;
    std::uint64_t seed = 20240901;
    std::vector<std::pair<std::string, std::string>> hyper;
};

struct AnalyzeReport {
    EffectEstimate estimate;
    std::string text;
};

AnalyzeReport analyze(const std::string& csv_path, const std::string& adjuster_kind,
                      const AnalyzeOptions& options);

}  // namespace stratadjust
