#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stratadjust {

// Malformed input data or configuration (CLI exit code 2).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Estimation cannot proceed on otherwise well-formed data, e.g. a stratum
// with an empty arm (CLI exit code 3).
struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One two-arm randomized trial. Stratum labels are dense integers 1..K;
// original labels, when different, live in metadata. Immutable by
// convention after construction; safe to share across threads read-only.
struct TrialDataset {
    Eigen::MatrixXd x;        // n x p covariates
    std::vector<int> stratum; // n labels in 1..K
    std::vector<int> arm;     // n indicators in {0,1}; empty until assigned
    Eigen::VectorXd y;        // n observed outcomes; size 0 until assigned
    std::optional<Eigen::VectorXd> y0, y1; // potential outcomes (synthetic data)
    double pi_target = 0.5;
    int num_strata = 1;
    std::vector<std::string> covariate_names;
    std::map<std::string, std::string> metadata;

    int n() const { return static_cast<int>(stratum.size()); }
    int p() const { return static_cast<int>(x.cols()); }
    bool assigned() const { return !arm.empty(); }
};

struct StratumStats {
    struct Cell {
        int n_k = 0;   // stratum size
        int n_k1 = 0;  // treated
        int n_k0 = 0;  // control
        double p_nk = 0.0;  // n_k / n
        double pi_nk = 0.0; // n_k1 / n_k
    };
    std::vector<Cell> cells; // indexed 0..K-1 for strata 1..K
    int n = 0;
};

StratumStats stratum_stats(const TrialDataset& ds);

// Empty iff all dataset invariants hold; each violation names the invariant
// and the offending index.
std::vector<std::string> validate(const TrialDataset& ds);

// Sets arm and derives y = a*y1 + (1-a)*y0 from the potential outcomes.
void apply_assignment(TrialDataset& ds, const std::vector<int>& assignments);

// Restriction to a subset of unit indices. K, pi_target and metadata are
// preserved, so stratum labels keep their meaning.
TrialDataset subset(const TrialDataset& ds, const std::vector<int>& indices);

struct CsvSchema {
    std::string outcome = "y";
    std::string arm = "arm";
    std::string stratum = "stratum";
    // Remaining numeric columns are covariates. Columns named y0/y1 are
    // loaded as potential outcomes when present.
};

// CSV with a header row, UTF-8, '.' decimal separator. Lines starting with
// '#' before the header carry dataset-level fields (pi_target, metadata)
// and are optional.
TrialDataset load_csv(const std::string& path, const CsvSchema& schema = {});
void write_csv(const TrialDataset& ds, const std::string& path);

}  // namespace stratadjust
