#include <cmath>
#include <sstream>

#include "delaylens/errors.hpp"
#include "delaylens/gam.hpp"
#include "gam_internal.hpp"

namespace delaylens {

namespace {

void validate_lambda(const std::vector<PenaltyTerm>& penalties,
                     const std::vector<double>& lambda) {
    std::size_t needed = 0;
    for (const PenaltyTerm& term : penalties) {
        needed = std::max(needed, static_cast<std::size_t>(term.lambda_index) + 1);
    }
    if (lambda.size() < needed) {
        throw UsageError("smoothing parameter vector has " + std::to_string(lambda.size()) +
                         " entries but the penalties index " + std::to_string(needed));
    }
    for (double v : lambda) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw UsageError("smoothing parameters must be finite and nonnegative");
        }
    }
}

double row_variance(const Eigen::RowVectorXd& x, const Eigen::MatrixXd& cov) {
    const double v = x * cov * x.transpose();
    return std::max(0.0, v);
}

std::string trace_tail(const std::vector<double>& trace) {
    std::ostringstream os;
    const std::size_t keep = std::min<std::size_t>(trace.size(), 6);
    for (std::size_t i = trace.size() - keep; i < trace.size(); ++i) {
        if (i > trace.size() - keep) os << ", ";
        os << trace[i];
    }
    return os.str();
}

}  // namespace

PirlsResult pirls_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<PenaltyTerm>& penalties,
                      const std::vector<double>& lambda, const PirlsOptions& options) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (y.size() != n) throw UsageError("design and outcome row counts differ");
    if (n < 1 || p < 1) throw UsageError("empty design");
    validate_lambda(penalties, lambda);

    PirlsResult res;
    res.beta = Eigen::VectorXd::Zero(p);

    // eta = 0 maps to pi = 1 - 1/e, so the starting weights are well scaled
    // and the reference deviance belongs to the starting coefficients.
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);

    Eigen::MatrixXd m, scratch, a;
    Eigen::VectorXd w, wz, r;
    double pen_dev = detail::bernoulli_deviance(eta, y) +
                     detail::penalty_quadform(penalties, lambda, res.beta);
    res.trace.push_back(pen_dev);

    const double base_ridge = 0.0;
    bool done = false;
    for (int iter = 1; iter <= options.max_iter && !done; ++iter) {
        res.iterations = iter;
        detail::working_weights(eta, y, w, wz);
        detail::normal_equations(X, w, wz, m, r, scratch);

        Eigen::VectorXd proposal;
        for (int attempt = 0; attempt < 2; ++attempt) {
            a = m;
            detail::add_penalties(a, penalties, lambda,
                                  res.ridge_used ? options.ridge : base_ridge);
            proposal = a.ldlt().solve(r);
            if (proposal.allFinite()) break;
            if (res.ridge_used) {
                throw NumericError("linear solve produced non-finite coefficients; trace: " +
                                   trace_tail(res.trace));
            }
            res.ridge_used = true;
        }

        // Step halving toward the previous coefficients keeps the penalized
        // deviance nonincreasing.
        Eigen::VectorXd candidate = proposal;
        double new_pen_dev = 0.0;
        bool accepted = false;
        for (int half = 0; half < 40; ++half) {
            eta.noalias() = X * candidate;
            new_pen_dev = detail::bernoulli_deviance(eta, y) +
                          detail::penalty_quadform(penalties, lambda, candidate);
            if (std::isfinite(new_pen_dev) &&
                new_pen_dev <= pen_dev + 1e-12 * (std::abs(pen_dev) + 1.0)) {
                accepted = true;
                break;
            }
            candidate = 0.5 * (candidate + res.beta);
        }
        if (!accepted) {
            // No descent direction left at working precision; treat the current
            // point as the optimum.
            eta.noalias() = X * res.beta;
            res.converged = true;
            break;
        }

        const double change = std::abs(new_pen_dev - pen_dev);
        res.beta = candidate;
        pen_dev = std::min(new_pen_dev, pen_dev);
        res.trace.push_back(pen_dev);

        if (!res.ridge_used && eta.cwiseAbs().maxCoeff() > 25.0) {
            // Quasi-separation: linear predictors are running away, so damp the
            // system from the next update on.
            res.ridge_used = true;
        }

        if (change < options.tol * (std::abs(new_pen_dev) + 0.1)) {
            res.converged = true;
            done = true;
        }
    }

    if (!res.converged) {
        throw NumericError("model fit did not converge after " +
                           std::to_string(options.max_iter) +
                           " iterations; penalized deviance trace: " + trace_tail(res.trace));
    }

    eta.noalias() = X * res.beta;
    res.deviance = detail::bernoulli_deviance(eta, y);
    res.penalized_deviance = res.deviance + detail::penalty_quadform(penalties, lambda, res.beta);

    detail::working_weights(eta, y, w, wz);
    detail::normal_equations(X, w, wz, m, r, scratch);
    a = m;
    detail::add_penalties(a, penalties, lambda, res.ridge_used ? options.ridge : base_ridge);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) {
        throw NumericError("penalized information matrix is not factorizable; trace: " +
                           trace_tail(res.trace));
    }
    res.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd influence = ldlt.solve(m);
    res.edf_per_column = influence.diagonal();
    res.edf_total = res.edf_per_column.sum();
    return res;
}

double penalized_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const std::vector<PenaltyTerm>& penalties,
                        const std::vector<double>& lambda, const Eigen::VectorXd& beta,
                        Eigen::VectorXd* gradient) {
    validate_lambda(penalties, lambda);
    const Eigen::VectorXd eta = X * beta;
    double ll = 0.0;
    Eigen::VectorXd score;
    if (gradient) score.setZero(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const LinkValue lv = cloglog_inverse(eta(i));
        ll += y(i) > 0.5 ? std::log(lv.pi) : std::log1p(-lv.pi);
        if (gradient) {
            score(i) = lv.deriv * (y(i) - lv.pi) / (lv.pi * (1.0 - lv.pi));
        }
    }
    ll -= 0.5 * detail::penalty_quadform(penalties, lambda, beta);
    if (gradient) {
        gradient->noalias() = X.transpose() * score;
        for (const PenaltyTerm& term : penalties) {
            const auto k = term.S.rows();
            gradient->segment(term.col_start, k) -=
                lambda[static_cast<std::size_t>(term.lambda_index)] *
                (term.S * beta.segment(term.col_start, k));
        }
    }
    return ll;
}

HazardPrediction predict_hazard(const FitResult& fit, const CovariateVector& cv, EventType type,
                                double t) {
    const Eigen::RowVectorXd x = design_row(fit.blocks, fit.n_cols(), cv, type, t);
    HazardPrediction out;
    out.eta = x.dot(fit.beta);
    out.se_eta = std::sqrt(row_variance(x, fit.covariance));
    out.pi = cloglog_inverse(out.eta).pi;
    return out;
}

std::vector<CurvePoint> baseline_hazard_curve(const FitResult& fit, EventType type) {
    const DesignBlock* baseline = nullptr;
    const DesignBlock* intercept = nullptr;
    for (const DesignBlock& b : fit.blocks) {
        if (b.kind == BlockKind::Intercept) intercept = &b;
        if (b.kind == BlockKind::Smooth && b.event_type_level == static_cast<int>(type)) {
            baseline = &b;
        }
    }
    if (!baseline) {
        throw DataError("no baseline smooth was fit for event type '" +
                        std::string(to_string(type)) + "'");
    }
    std::vector<CurvePoint> out;
    out.reserve(static_cast<std::size_t>(fit.spec.d_max));
    for (int t = 1; t <= fit.spec.d_max; ++t) {
        Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(fit.n_cols());
        if (intercept) x(intercept->col_start) = 1.0;
        bool clamped = false;
        if (baseline->dropped_to_linear) {
            x(baseline->col_start) = t - baseline->center;
        } else {
            clamped = t < baseline->basis.x_min || t > baseline->basis.x_max;
            x.segment(baseline->col_start, baseline->col_count) =
                baseline->basis.row(t) * baseline->transform;
        }
        const double eta = x.dot(fit.beta);
        const double se_eta = std::sqrt(row_variance(x, fit.covariance));
        const LinkValue lv = cloglog_inverse(eta);
        out.push_back({static_cast<double>(t), lv.pi, lv.deriv * se_eta, clamped});
    }
    return out;
}

PartialEffectCurve partial_effect(const FitResult& fit, const std::string& term,
                                  const std::vector<double>& grid) {
    const DesignBlock* block = nullptr;
    for (const DesignBlock& b : fit.blocks) {
        if (b.name == term) {
            block = &b;
            break;
        }
    }
    if (!block || block->kind != BlockKind::Smooth) {
        throw UsageError("no smooth term named '" + term + "' in this fit");
    }
    PartialEffectCurve curve;
    curve.term = term;
    curve.points.reserve(grid.size());
    for (double x : grid) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(fit.n_cols());
        bool clamped = false;
        if (block->dropped_to_linear) {
            row(block->col_start) = x - block->center;
        } else {
            clamped = x < block->basis.x_min || x > block->basis.x_max;
            row.segment(block->col_start, block->col_count) =
                block->basis.row(x) * block->transform;
        }
        const double est = row.dot(fit.beta);
        const double se = std::sqrt(row_variance(row, fit.covariance));
        curve.points.push_back({x, est, se, clamped});
    }
    return curve;
}

std::vector<CoefRow> coefficient_table(const FitResult& fit) {
    std::vector<CoefRow> out;
    for (const DesignBlock& b : fit.blocks) {
        if (b.kind != BlockKind::Intercept && b.kind != BlockKind::Linear) continue;
        for (int c = 0; c < b.col_count; ++c) {
            const int j = b.col_start + c;
            CoefRow row;
            row.term = fit.column_names[static_cast<std::size_t>(j)];
            row.estimate = fit.beta(j);
            row.se = std::sqrt(std::max(0.0, fit.covariance(j, j)));
            row.z = row.se > 0.0 ? row.estimate / row.se
                                 : std::numeric_limits<double>::quiet_NaN();
            row.p = std::isfinite(row.z) ? std::erfc(std::abs(row.z) / std::sqrt(2.0)) : 1.0;
            out.push_back(row);
        }
    }
    return out;
}

}  // namespace delaylens
