#pragma once

#include <Eigen/Dense>

namespace stratadjust::detail {

// Solves the symmetric positive semi-definite system m*z = rhs by LDLT.
// If the factorization fails or the diagonal pivot ratio suggests a
// condition number above 1e10, a ridge jitter of 1e-8*trace/dim is added
// to the diagonal first.
inline Eigen::VectorXd solve_sym_jittered(Eigen::MatrixXd m, const Eigen::VectorXd& rhs) {
    const int dim = static_cast<int>(m.rows());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    bool ok = ldlt.info() == Eigen::Success;
    if (ok) {
        const auto d = ldlt.vectorD();
        double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < dim; ++i) {
            const double a = std::abs(d[i]);
            dmax = std::max(dmax, a);
            dmin = std::min(dmin, a);
        }
        if (!(dmin > 0.0) || !std::isfinite(dmax) || dmax / dmin > 1e10) ok = false;
    }
    if (!ok) {
        const double jitter = 1e-8 * m.trace() / dim;
        m.diagonal().array() += jitter > 0.0 ? jitter : 1e-12;
        ldlt.compute(m);
    }
    return ldlt.solve(rhs);
}

}  // namespace stratadjust::detail
