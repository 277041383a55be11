#include "stratadjust/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace stratadjust {

SimulationSummary summarize(const std::vector<EffectEstimate>& estimates, double tau_true) {
    if (estimates.empty()) throw ValidationError("summarize: no estimates");
    SimulationSummary s;
    s.replications = static_cast<int>(estimates.size());
    s.tau_true = tau_true;
    double sum = 0.0, se_sum = 0.0;
    int covered = 0;
    for (const auto& e : estimates) {
        sum += e.tau_hat;
        se_sum += e.se;
        covered += (e.ci_low <= tau_true && tau_true <= e.ci_high);
    }
    s.mean_tau = sum / s.replications;
    s.bias = s.mean_tau - tau_true;
    s.se = se_sum / s.replications;
    s.cp = static_cast<double>(covered) / s.replications;
    if (s.replications > 1) {
        double ss = 0.0;
        for (const auto& e : estimates) {
            const double d = e.tau_hat - s.mean_tau;
            ss += d * d;
        }
        s.sd = std::sqrt(ss / (s.replications - 1));
    } else {
        s.sd = std::numeric_limits<double>::quiet_NaN();
        std::fprintf(stderr, "warning: SD undefined with a single replication\n");
    }
    return s;
}

namespace {

EffectEstimate run_replication(const ScenarioConfig& cfg, int rep) {
    const std::uint64_t rep_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    ModelSpec model{cfg.model, cfg.n, cfg.p};

    Rng gen_rng = make_rng(mix_seed(rep_seed, 1));
    TrialDataset ds = generate(model, gen_rng);
    ds.pi_target = cfg.pi;

    RandomizerConfig rand_cfg = cfg.randomizer;
    rand_cfg.pi = cfg.pi;
    Rng rand_rng = make_rng(mix_seed(rep_seed, 2));
    apply_assignment(ds, randomize(ds.stratum, rand_cfg, rand_rng));

    AdjusterSpec adj = cfg.adjuster;
    if (adj.kind == AdjusterKind::oracle && !adj.oracle_model) adj.oracle_model = model;

    Rng fit_rng = make_rng(mix_seed(rep_seed, 3));
    if (cfg.use_crossfit) return crossfit_estimate(ds, adj, cfg.folds, fit_rng, cfg.level);
    return adjusted_estimate(ds, fit(adj, ds, fit_rng), cfg.level);
}

void run_parallel(int tasks, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, tasks));
    if (jobs == 1) {
        for (int t = 0; t < tasks; ++t) fn(t);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mu;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            const int t = next.fetch_add(1);
            if (t >= tasks) return;
            {
                std::lock_guard<std::mutex> lock(err_mu);
                if (error) return;
            }
            try {
                fn(t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::string format2(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

SimulationSummary run_scenario_detailed(const ScenarioConfig& cfg, int jobs,
                                        std::vector<EffectEstimate>& estimates) {
    if (cfg.replications < 1) throw ValidationError("replications must be >= 1");
    const auto start = std::chrono::steady_clock::now();
    const double tau_true = true_ate_cached(cfg.model);

    estimates.assign(cfg.replications, {});
    run_parallel(cfg.replications, jobs, [&](int rep) {
        try {
            estimates[rep] = run_replication(cfg, rep);
        } catch (const EstimationError& e) {
            throw EstimationError("replication " + std::to_string(rep + 1) + ": " + e.what());
        }
    });

    SimulationSummary s = summarize(estimates, tau_true);
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
}

SimulationSummary run_scenario(const ScenarioConfig& cfg, int jobs) {
    std::vector<EffectEstimate> estimates;
    return run_scenario_detailed(cfg, jobs, estimates);
}

std::string emit_table(const std::vector<SummaryRow>& rows, TableFormat format) {
    if (rows.empty()) throw ValidationError("emit_table: no rows");
    std::ostringstream os;
    if (format == TableFormat::csv) {
        os << "Model,Estimator,Randomizer,Bias,SD,SE,CP\n";
        for (const auto& r : rows)
            os << r.model << ',' << r.estimator << ',' << r.randomizer << ','
               << format2(r.summary.bias) << ',' << format2(r.summary.sd) << ','
               << format2(r.summary.se) << ',' << format2(r.summary.cp) << "\n";
        return os.str();
    }

    // Markdown: rows are model x estimator, one column group per randomizer.
    std::vector<std::string> randomizers;
    for (const auto& r : rows)
        if (std::find(randomizers.begin(), randomizers.end(), r.randomizer) ==
            randomizers.end())
            randomizers.push_back(r.randomizer);
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& r : rows) {
        auto key = std::make_pair(r.model, r.estimator);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    std::map<std::pair<std::string, std::string>, const SummaryRow*> lookup;
    for (const auto& r : rows) lookup[{r.model + '\x1f' + r.estimator, r.randomizer}] = &r;

    os << "| Model | Estimator |";
    for (const auto& rd : randomizers) os << ' ' << rd << " Bias | SD | SE | CP |";
    os << "\n|---|---|";
    for (std::size_t i = 0; i < randomizers.size(); ++i) os << "---|---|---|---|";
    os << "\n";
    for (const auto& [model, estimator] : keys) {
        os << "| " << model << " | " << estimator << " |";
        for (const auto& rd : randomizers) {
            auto it = lookup.find({model + '\x1f' + estimator, rd});
            if (it == lookup.end()) {
                os << " | | | |";
            } else {
                const auto& s = it->second->summary;
                os << ' ' << format2(s.bias) << " | " << format2(s.sd) << " | "
                   << format2(s.se) << " | " << format2(s.cp) << " |";
            }
        }
        os << "\n";
    }
    return os.str();
}

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError("expected a boolean, got '" + v + "'");
}

void apply_hyper_list(AdjusterHyper& hyper, const std::string& list) {
    std::istringstream is(list);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ValidationError("hyper override '" + item + "' is not key=value");
        hyper.set(item.substr(0, eq), item.substr(eq + 1));
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

ScenarioConfig parse_config_section(
    const std::vector<std::pair<std::string, std::string>>& kv, const std::string& name) {
    ScenarioConfig cfg;
    cfg.name = name;
    for (const auto& [key, value] : kv) {
        if (key == "model") cfg.model = std::stoi(value);
        else if (key == "n") cfg.n = std::stoi(value);
        else if (key == "p") cfg.p = std::stoi(value);
        else if (key == "pi") cfg.pi = std::stod(value);
        else if (key == "randomizer") cfg.randomizer.kind = rand_kind_from_string(value);
        else if (key == "block_size") cfg.randomizer.block_size = std::stoi(value);
        else if (key == "coin_prob") cfg.randomizer.coin_prob = std::stod(value);
        else if (key == "adjuster") cfg.adjuster.kind = adjuster_kind_from_string(value);
        else if (key == "stratum_specific") cfg.adjuster.stratum_specific = parse_bool(value);
        else if (key == "hyper") apply_hyper_list(cfg.adjuster.hyper, value);
        else if (key == "crossfit") cfg.use_crossfit = parse_bool(value);
        else if (key == "folds") cfg.folds = std::stoi(value);
        else if (key == "replications" || key == "R") cfg.replications = std::stoi(value);
        else if (key == "level") cfg.level = std::stod(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else throw ValidationError("unknown config key '" + key + "' in [" + name + "]");
    }
    if (cfg.model < 1 || cfg.model > 8) throw ValidationError("model must be in 1..8");
    if (!(cfg.pi > 0.0 && cfg.pi < 1.0)) throw ValidationError("pi must be in (0,1)");
    if (cfg.replications < 1) throw ValidationError("replications must be >= 1");
    return cfg;
}

std::vector<ScenarioConfig> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path + "'");
    std::vector<ScenarioConfig> out;
    std::string line, section;
    std::vector<std::pair<std::string, std::string>> kv;
    auto flush = [&] {
        if (!section.empty()) out.push_back(parse_config_section(kv, section));
        kv.clear();
    };
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            flush();
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ValidationError("empty section name at line " + std::to_string(line_no));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("expected key=value at line " + std::to_string(line_no));
        if (section.empty())
            throw ValidationError("key before any [section] at line " + std::to_string(line_no));
        kv.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    flush();
    if (out.empty()) throw ValidationError("config '" + path + "' defines no scenarios");
    return out;
}

AnalyzeReport analyze(const std::string& csv_path, const std::string& adjuster_kind,
                      const AnalyzeOptions& options) {
    TrialDataset ds = load_csv(csv_path);
    if (options.pi > 0.0) ds.pi_target = options.pi;
    const auto violations = validate(ds);
    if (!violations.empty()) {
        std::string msg = "dataset failed validation:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw ValidationError(msg);
    }

    AdjusterSpec spec;
    spec.kind = adjuster_kind_from_string(adjuster_kind);
    spec.stratum_specific = options.stratum_specific;
    for (const auto& [k, v] : options.hyper) spec.hyper.set(k, v);
    if (spec.kind == AdjusterKind::oracle) {
        auto it = ds.metadata.find("model");
        if (it == ds.metadata.end())
            throw ValidationError("oracle adjuster needs a synthetic dataset with model metadata");
        spec.oracle_model = ModelSpec{std::stoi(it->second), ds.n(), ds.p()};
    }

    Rng rng = make_rng(options.seed);
    AnalyzeReport report;
    std::ostringstream os;
    os.precision(6);
    if (options.crossfit_folds > 0) {
        report.estimate =
            crossfit_estimate(ds, spec, options.crossfit_folds, rng, options.level);
    } else {
        ProjectionFit f = fit(spec, ds, rng);
        report.estimate = adjusted_estimate(ds, f, options.level);
        os << "adjuster diagnostics: in-sample MSE arm1=" << f.in_sample_mse[1]
           << " arm0=" << f.in_sample_mse[0] << "; model size arm1=" << f.model_size[1]
           << " arm0=" << f.model_size[0] << "\n";
    }
    const auto& e = report.estimate;
    os << "n=" << e.n << " strata=" << ds.num_strata << " pi=" << ds.pi_target << "\n"
       << "tau_hat = " << e.tau_hat << "\n"
       << "se      = " << e.se << "\n"
       << static_cast<int>(e.ci_level * 100) << "% CI = [" << e.ci_low << ", " << e.ci_high
       << "]\n"
       << "variance components: var_r = " << e.var_r << ", var_hr = " << e.var_hr << "\n"
       << "method: " << e.method << "\n";
    report.text = os.str();
    return report;
}

}  // namespace stratadjust
