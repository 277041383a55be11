#include "stratadjust/trial_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace stratadjust {

StratumStats stratum_stats(const TrialDataset& ds) {
    StratumStats st;
    st.n = ds.n();
    st.cells.resize(ds.num_strata);
    for (int i = 0; i < ds.n(); ++i) {
        auto& c = st.cells[ds.stratum[i] - 1];
        ++c.n_k;
        if (ds.assigned()) {
            if (ds.arm[i] == 1) ++c.n_k1; else ++c.n_k0;
        }
    }
    for (auto& c : st.cells) {
        c.p_nk = st.n > 0 ? static_cast<double>(c.n_k) / st.n : 0.0;
        c.pi_nk = c.n_k > 0 ? static_cast<double>(c.n_k1) / c.n_k : 0.0;
    }
    return st;
}

std::vector<std::string> validate(const TrialDataset& ds) {
    std::vector<std::string> out;
    const int n = ds.n();
    if (ds.x.rows() != n)
        out.push_back("covariate row count " + std::to_string(ds.x.rows()) +
                      " does not match n=" + std::to_string(n));
    if (!(ds.pi_target > 0.0 && ds.pi_target < 1.0))
        out.push_back("pi_target not in (0,1)");
    std::vector<int> seen(ds.num_strata, 0);
    for (int i = 0; i < n; ++i) {
        int b = ds.stratum[i];
        if (b < 1 || b > ds.num_strata) {
            out.push_back("stratum label out of range at index " + std::to_string(i));
            continue;
        }
        ++seen[b - 1];
    }
    for (int k = 0; k < ds.num_strata; ++k)
        if (seen[k] == 0) out.push_back("empty stratum " + std::to_string(k + 1));
    if (ds.assigned()) {
        if (static_cast<int>(ds.arm.size()) != n)
            out.push_back("assignment length mismatch");
        for (int i = 0; i < n && i < static_cast<int>(ds.arm.size()); ++i)
            if (ds.arm[i] != 0 && ds.arm[i] != 1)
                out.push_back("non-binary assignment at index " + std::to_string(i));
        if (ds.y0 && ds.y1 && ds.y.size() == n) {
            for (int i = 0; i < n; ++i) {
                double expect = ds.arm[i] == 1 ? (*ds.y1)[i] : (*ds.y0)[i];
                if (ds.y[i] != expect)
                    out.push_back("observed outcome inconsistent with potential outcomes at index " +
                                  std::to_string(i));
            }
        }
    }
    return out;
}

void apply_assignment(TrialDataset& ds, const std::vector<int>& assignments) {
    if (static_cast<int>(assignments.size()) != ds.n())
        throw ValidationError("assignment length does not match dataset size");
    if (!ds.y0 || !ds.y1)
        throw ValidationError("apply_assignment requires potential outcomes");
    ds.arm = assignments;
    ds.y.resize(ds.n());
    for (int i = 0; i < ds.n(); ++i) {
        if (assignments[i] != 0 && assignments[i] != 1)
            throw ValidationError("non-binary assignment at index " + std::to_string(i));
        ds.y[i] = assignments[i] == 1 ? (*ds.y1)[i] : (*ds.y0)[i];
    }
}

TrialDataset subset(const TrialDataset& ds, const std::vector<int>& indices) {
    TrialDataset out;
    const int m = static_cast<int>(indices.size());
    out.x.resize(m, ds.x.cols());
    out.stratum.resize(m);
    if (ds.assigned()) out.arm.resize(m);
    if (ds.y.size() == ds.n()) out.y.resize(m);
    if (ds.y0) out.y0 = Eigen::VectorXd(m);
    if (ds.y1) out.y1 = Eigen::VectorXd(m);
    for (int j = 0; j < m; ++j) {
        int i = indices[j];
        out.x.row(j) = ds.x.row(i);
        out.stratum[j] = ds.stratum[i];
        if (ds.assigned()) out.arm[j] = ds.arm[i];
        if (ds.y.size() == ds.n()) out.y[j] = ds.y[i];
        if (ds.y0) (*out.y0)[j] = (*ds.y0)[i];
        if (ds.y1) (*out.y1)[j] = (*ds.y1)[i];
    }
    out.pi_target = ds.pi_target;
    out.num_strata = ds.num_strata;
    out.covariate_names = ds.covariate_names;
    out.metadata = ds.metadata;
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') { out.push_back(cur); cur.clear(); }
        else if (c != '\r') cur.push_back(c);
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, const std::string& what, std::size_t line_no) {
    double v;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("non-numeric " + what + " '" + s + "' at line " +
                              std::to_string(line_no));
    return v;
}

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TrialDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");

    TrialDataset ds;
    std::string line;
    std::size_t line_no = 0;
    bool pi_given = false;

    // Optional '# key=value' preamble written by write_csv.
    std::string header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            auto eq = body.find('=');
            if (eq == std::string::npos) continue;
            std::string key = body.substr(0, eq), val = body.substr(eq + 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            if (key == "pi_target") {
                ds.pi_target = parse_number(val, "pi_target", line_no);
                pi_given = true;
            } else {
                ds.metadata[key] = val;
            }
            continue;
        }
        header = line;
        break;
    }
    if (header.empty()) throw ValidationError("no header row in '" + path + "'");

    auto cols = split_line(header);
    int ci_y = -1, ci_arm = -1, ci_stratum = -1, ci_y0 = -1, ci_y1 = -1;
    std::vector<int> ci_cov;
    for (int c = 0; c < static_cast<int>(cols.size()); ++c) {
        const std::string& name = cols[c];
        if (name == schema.outcome) ci_y = c;
        else if (name == schema.arm) ci_arm = c;
        else if (name == schema.stratum) ci_stratum = c;
        else if (name == "y0") ci_y0 = c;
        else if (name == "y1") ci_y1 = c;
        else ci_cov.push_back(c);
    }
    if (ci_y < 0) throw ValidationError("missing outcome column '" + schema.outcome + "'");
    if (ci_arm < 0) throw ValidationError("missing arm column '" + schema.arm + "'");
    if (ci_stratum < 0) throw ValidationError("missing stratum column '" + schema.stratum + "'");

    std::vector<double> ys, y0s, y1s;
    std::vector<int> arms;
    std::vector<std::string> stratum_raw;
    std::vector<std::vector<double>> covs;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto vals = split_line(line);
        if (vals.size() != cols.size())
            throw ValidationError("row width mismatch at line " + std::to_string(line_no));
        ys.push_back(parse_number(vals[ci_y], "outcome", line_no));
        double a = parse_number(vals[ci_arm], "assignment", line_no);
        if (a != 0.0 && a != 1.0)
            throw ValidationError("non-binary assignment '" + vals[ci_arm] + "' at line " +
                                  std::to_string(line_no));
        arms.push_back(static_cast<int>(a));
        stratum_raw.push_back(vals[ci_stratum]);
        if (ci_y0 >= 0) y0s.push_back(parse_number(vals[ci_y0], "y0", line_no));
        if (ci_y1 >= 0) y1s.push_back(parse_number(vals[ci_y1], "y1", line_no));
        std::vector<double> row;
        row.reserve(ci_cov.size());
        for (int c : ci_cov) row.push_back(parse_number(vals[c], "covariate", line_no));
        covs.push_back(std::move(row));
    }
    const int n = static_cast<int>(ys.size());
    if (n == 0) throw ValidationError("no data rows in '" + path + "'");

    // Normalize stratum labels to dense 1..K. Numeric labels sort numerically,
    // otherwise lexicographically; the original labels go to metadata.
    std::vector<std::string> uniq = stratum_raw;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    bool all_numeric = true;
    std::vector<double> uniq_num(uniq.size());
    for (std::size_t i = 0; i < uniq.size(); ++i) {
        auto [ptr, ec] = std::from_chars(uniq[i].data(), uniq[i].data() + uniq[i].size(), uniq_num[i]);
        if (ec != std::errc{} || ptr != uniq[i].data() + uniq[i].size()) { all_numeric = false; break; }
    }
    if (all_numeric) {
        std::vector<std::size_t> order(uniq.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return uniq_num[a] < uniq_num[b]; });
        std::vector<std::string> sorted;
        sorted.reserve(uniq.size());
        for (auto i : order) sorted.push_back(uniq[i]);
        uniq = std::move(sorted);
    }
    std::map<std::string, int> label_to_dense;
    std::string orig_labels;
    for (std::size_t i = 0; i < uniq.size(); ++i) {
        label_to_dense[uniq[i]] = static_cast<int>(i) + 1;
        if (i) orig_labels += ',';
        orig_labels += uniq[i];
    }

    ds.num_strata = static_cast<int>(uniq.size());
    if (ds.metadata.find("stratum_values") == ds.metadata.end())
        ds.metadata["stratum_values"] = orig_labels;
    ds.stratum.resize(n);
    for (int i = 0; i < n; ++i) ds.stratum[i] = label_to_dense[stratum_raw[i]];
    ds.arm = std::move(arms);
    ds.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    if (ci_y0 >= 0) ds.y0 = Eigen::Map<Eigen::VectorXd>(y0s.data(), n);
    if (ci_y1 >= 0) ds.y1 = Eigen::Map<Eigen::VectorXd>(y1s.data(), n);
    const int p = static_cast<int>(ci_cov.size());
    ds.x.resize(n, p);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < p; ++c) ds.x(i, c) = covs[i][c];
    for (int c : ci_cov) ds.covariate_names.push_back(cols[c]);
    if (!pi_given) {
        long n1 = 0;
        for (int a : ds.arm) n1 += a;
        ds.pi_target = static_cast<double>(n1) / n;
        if (ds.pi_target <= 0.0 || ds.pi_target >= 1.0)
            throw ValidationError("single-arm data: cannot infer pi_target");
    }
    return ds;
}

void write_csv(const TrialDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << "# pi_target=" << format_full(ds.pi_target) << "\n";
    for (const auto& [k, v] : ds.metadata) out << "# " << k << "=" << v << "\n";

    out << "y,arm,stratum";
    if (ds.y0 && ds.y1) out << ",y0,y1";
    for (int c = 0; c < ds.p(); ++c) {
        out << ',';
        if (c < static_cast<int>(ds.covariate_names.size())) out << ds.covariate_names[c];
        else out << 'x' << (c + 1);
    }
    out << "\n";
    for (int i = 0; i < ds.n(); ++i) {
        out << format_full(ds.y.size() == ds.n() ? ds.y[i] : 0.0) << ','
            << (ds.assigned() ? ds.arm[i] : 0) << ',' << ds.stratum[i];
        if (ds.y0 && ds.y1)
            out << ',' << format_full((*ds.y0)[i]) << ',' << format_full((*ds.y1)[i]);
        for (int c = 0; c < ds.p(); ++c) out << ',' << format_full(ds.x(i, c));
        out << "\n";
    }
}

}  // namespace stratadjust
