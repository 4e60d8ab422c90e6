#pragma once

#include <Eigen/Dense>
#include <vector>

#include "delaylens/gam.hpp"

namespace delaylens::detail {

// Adds lambda-weighted penalty blocks onto a into the diagonal band owned by
// each term. Optionally adds a ridge on the full diagonal.
inline void add_penalties(Eigen::MatrixXd& a, const std::vector<PenaltyTerm>& penalties,
                          const std::vector<double>& lambda, double ridge) {
    for (const PenaltyTerm& term : penalties) {
        const auto k = term.S.rows();
        a.block(term.col_start, term.col_start, k, k) +=
            lambda[static_cast<std::size_t>(term.lambda_index)] * term.S;
    }
    if (ridge > 0.0) a.diagonal().array() += ridge;
}

inline double penalty_quadform(const std::vector<PenaltyTerm>& penalties,
                               const std::vector<double>& lambda, const Eigen::VectorXd& beta) {
    double q = 0.0;
    for (const PenaltyTerm& term : penalties) {
        const auto k = term.S.rows();
        const Eigen::VectorXd seg = beta.segment(term.col_start, k);
        q += lambda[static_cast<std::size_t>(term.lambda_index)] * seg.dot(term.S * seg);
    }
    return q;
}

// -2 log likelihood of independent Bernoulli outcomes under the cloglog mean.
inline double bernoulli_deviance(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double pi = cloglog_inverse(eta(i)).pi;
        dev += y(i) > 0.5 ? -2.0 * std::log(pi) : -2.0 * std::log1p(-pi);
    }
    return dev;
}

// Fisher-scoring working quantities, kept in the overflow-safe form
//   w_i  = d_i^2 / (pi_i (1 - pi_i))
//   wz_i = w_i eta_i + d_i (y_i - pi_i) / (pi_i (1 - pi_i))
// where d = d pi / d eta, so the normal-equation right side is X' wz without
// ever forming the working response itself.
inline void working_weights(const Eigen::VectorXd& eta, const Eigen::VectorXd& y,
                            Eigen::VectorXd& w, Eigen::VectorXd& wz) {
    const auto n = eta.size();
    w.resize(n);
    wz.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const LinkValue lv = cloglog_inverse(eta(i));
        const double var = lv.pi * (1.0 - lv.pi);
        w(i) = lv.deriv * lv.deriv / var;
        wz(i) = w(i) * eta(i) + lv.deriv * (y(i) - lv.pi) / var;
    }
}

// M = X' W X (lower triangle filled, then symmetrized) and r = X' wz.
inline void normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& w,
                             const Eigen::VectorXd& wz, Eigen::MatrixXd& m,
                             Eigen::VectorXd& r, Eigen::MatrixXd& scratch) {
    scratch = w.array().sqrt().matrix().asDiagonal() * x;
    m.setZero(x.cols(), x.cols());
    m.selfadjointView<Eigen::Lower>().rankUpdate(scratch.transpose());
    m = m.selfadjointView<Eigen::Lower>();
    r.noalias() = x.transpose() * wz;
}

}  // namespace delaylens::detail
